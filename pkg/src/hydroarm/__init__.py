"""Two-link hydraulic manipulator: simulation, reversible data-driven
modeling, and hybrid PD + model-inversion motion control."""

__version__ = "0.1.0"
