"""Certified radii for randomized smoothing under many noise families and lp adversaries."""

from .harness import ClassifierSpec, certify_mc, clopper_pearson_lower, exact_rho, tightness_check
from .levelset import RadiusTable, build_table, growth_pair, lookup
from .noise import NoiseSpec, lambda_for_sigma, sample, sigma_for_lambda, spec_for_sigma
from .radius import (Adversary, CertifiedRadius, Method, UnsupportedPair, certified_radius,
                     phi_function, radius_curve, radius_iid, supported_adversaries)
from .wulff import ShapeId, set_growth, shape_phi_compare, wulff_crystal_volume, zonotope_volume

__version__ = "0.1.0"

__all__ = [
    "Adversary", "CertifiedRadius", "ClassifierSpec", "Method", "NoiseSpec", "RadiusTable",
    "ShapeId", "UnsupportedPair", "build_table", "certified_radius", "certify_mc",
    "clopper_pearson_lower", "exact_rho", "growth_pair", "lambda_for_sigma", "lookup",
    "phi_function", "radius_curve", "radius_iid", "sample", "set_growth", "shape_phi_compare",
    "sigma_for_lambda", "spec_for_sigma", "supported_adversaries", "tightness_check",
    "wulff_crystal_volume", "zonotope_volume",
]
