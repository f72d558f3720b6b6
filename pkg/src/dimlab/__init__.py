"""dimlab: exact-arithmetic experiments on fractal dimensions.

Box, packing and energy dimension estimators over symbolic compact
metric spaces, the digit-split counterexample pair on the Cantor set,
a layered prevalence-witness sampler, and kernel-integral bounds for
the energy method, with a CSV-emitting command line driver.
"""

__version__ = "0.1.0"
