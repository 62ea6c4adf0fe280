"""Verification of the limit theorems: KS harness, limit laws, generator numerics."""

from .generator import (TestFunction, fastjump_check, generator_convergence_table,
                        generator_limit, generator_prelimit, generator_terms,
                        mc_generator_subordinator)
from .ks import KsReport, ks_one_sample, ks_two_sample
from .laws import esn_marginal_cdf, fdd_extremal_cdf
from .tables import ConvergenceTable
from .verify import (esn_crossvalidate, verify_cbi_esn_limit, verify_prop1_transforms,
                     verify_subordinator_limit)
