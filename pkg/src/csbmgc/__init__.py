"""Two-class contextual stochastic block models, graph convolution, and
linear classifiers: samplers, solvers, separability certificates, closed-form
rates, and the experiment harness that ties them together."""

__version__ = "0.1.0"
