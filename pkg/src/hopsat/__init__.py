"""3-SAT on Hopfield-style stochastic solvers: CNF handling, PUBO/QUBO energies,
solvers, landscape analysis and TTS/ETS benchmarking."""

__version__ = "0.1.0"
