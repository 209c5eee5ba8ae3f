"""Circuit-QED simulation and fitting for quantum-dot charge qubits."""
__version__ = "0.1.0"
