"""Covered-call replicating market maker and the derivatives built on it."""

from .blackscholes import OptionSpec, binary_values, covered_call_value, d1_d2, vanilla_values
from .pool import PoolParams, PoolState, create_pool, report_price, swap
from .numerics import std_normal_cdf, std_normal_inv_cdf, std_normal_pdf

__version__ = "0.1.0"
