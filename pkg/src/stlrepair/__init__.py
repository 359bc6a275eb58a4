"""Controller synthesis from signal temporal logic via MILP, with
infeasibility diagnosis and automatic specification repair."""

__version__ = "0.1.0"
