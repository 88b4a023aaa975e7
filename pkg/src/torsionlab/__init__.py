"""Torsion of finite complexes and flat bundles with symmetric bilinear forms."""
from .circle_analytic import (CircleBundle, CoEulerStructureS1, EulerStructureS1, Holonomy,
                              SpectralReport, analytic_torsion_circle, b_sign, bfk_determinant,
                              galerkin_determinant_ratio, galerkin_spectrum, holonomy_sign,
                              kamber_tondeur_integral, laplacian_coefficients, monodromy,
                              winding_number)
from .combinatorial import (MappingTorusInput, RelativeTorsionReport, combinatorial_torsion_circle,
                            lefschetz_log_series, lefschetz_zeta, mapping_torus_torsion,
                            morse_complex_circle, poincare_dual_circle, relative_torsion)
from .complex_torsion import (CohomologyBasis, GradedBilinearForm, GradedComplex, TorsionValue,
                              admissible_radii, betti_numbers, cohomology, is_acyclic,
                              kernel_form_report, laplacian, torsion_direct, torsion_spectral,
                              transpose_differential)
from .errors import (ClusterAmbiguousError, ContourOnSpectrumError, IntegrationDivergedError,
                     NotAComplexError, NotAcyclicError, ParseError, SingularFormError,
                     TorsionError, ValidationError, ZetaPoleError)
from .linalg_core import EigenCluster, generalized_eigenspaces, generalized_kernel, rank_kernel
from .problem_io import ProblemFile, ResultRecord, dump_problem, load_problem, save_problem
from .trigpoly import TrigPoly

__version__ = "0.1.0"
