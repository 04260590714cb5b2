"""noisefence: output-noise-perturbation defense lab for black-box attacks
on small softmax classifiers."""

__version__ = "0.1.0"
