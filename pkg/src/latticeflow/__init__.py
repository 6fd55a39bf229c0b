"""Relative uniform convergence and positive semigroups on function lattices of the line."""
from .funcspace import (TOL_ARITH, TOL_KNOT, TOL_ZERO, ClosedForm, ConeFlag, Domination, GridSpec,
                        NonFiniteError, PiecewiseAffineFunction, RealFunction, Sampled, closed,
                        cone_flags, constant, detect_support, dominates, function_from_json,
                        gaussian_mixture, hat_pa, identity, lattice_op, one, order_unit_norm)
from .ru_conv import (CcVerdict, EpsRow, FunctionFamily, LpaApproximation, RegulatorReport,
                      cc_regulator, check_cc_characterization, lpa_approximate, time_samples,
                      verify_ru_convergence)
from .semigroups import (LAW_TOL, DivergenceTable, LawReport, OrbitBound, OrbitBoundError,
                         SemigroupOperator, check_positivity, check_semigroup_law, gamma_constant,
                         heat_guaranteed_delta, lp_counterexample_probe, make_heat,
                         make_translation, orbit_order_bound, regulator_search, test_ruc_at_zero)
from .semiflows import (FLOW_TOL, FlowLawReport, LpaRegulatorTrace, Semiflow, SemiflowLawError,
                        build_lpa_regulator, check_criterion_C, check_criterion_LipUC,
                        check_semiflow_laws, compose, decay, make_koopman, max_over_orbit,
                        poly_drift, semiflow, shift)
from .constructions import (CommutationError, ConditionRResult, IsoError, LatticeIso,
                            commutation_defects, condition_r_witness, dilation_iso, identity_iso,
                            product, rescale, scaling_iso, similar)

__version__ = "0.1.0"
