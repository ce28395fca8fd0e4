from .grid import Grid, ResidualReport, SampledFn
from .kernels import (
    ExpWeighted,
    FractionalJ,
    HeatBoundary,
    Heaviside,
    Indicator01,
    Kernel,
    Sampled,
    Scaled,
    kernel_convolve,
)
from .ops import (
    as_sampled,
    conv_power,
    convolve,
    cumulative,
    dual_convolve,
    kernel_laplace_analytic,
    laplace_numeric,
    laplace_tail_bound,
)
