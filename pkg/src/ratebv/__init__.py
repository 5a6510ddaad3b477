"""
Rate-independent evolution in finite dimensions: viscous approximation,
contact-potential reparametrization, BV certificates and load control.
"""
from .certify import (PROFILES, CertificateReport, Tolerances, certify, chain_rule_residual,
                      component_transient, detect_G, g_components, jump_transient,
                      lambda_recover)
from .control import (ControlResult, FDGradientDescent, FullExtraction, NelderMead, Surrogate,
                      optimize, reduced_objective)
from .errors import (ArgumentError, DomainError, EvaluationError, InvariantViolation,
                     NumericalError, RateBVError)
from .model import (ControlObjective, CustomF, DoubleWellF, LoadPath, ProblemSpec, ZeroF,
                    apriori_bounds, conj_Rdelta, contact_potential, energy_E, energy_I, grad_I,
                    h1_norm, lambda_convexity, prox_Gdelta, stability_gap)
from .reparam import (ConvergenceReport, ParamTrajectory, arclength, default_gap_threshold,
                      extract_bv, reparametrize)
from .viscous import (ViscousTrajectory, edb_residual, nu_delta_initial, solve_autonomous,
                      solve_viscous)

__version__ = "0.1.0"
