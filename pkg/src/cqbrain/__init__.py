"""cqbrain: hybrid classical-quantum MRI classification toolkit."""

__version__ = "0.1.0"
