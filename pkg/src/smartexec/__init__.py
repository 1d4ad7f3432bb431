"""Smart executors: loops whose execution policy, chunk size and prefetch
distance are picked at dispatch time by logistic-regression models trained on
static and dynamic loop features."""

__version__ = "0.1.0"
