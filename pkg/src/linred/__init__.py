"""linred: synthesize and verify mixed-integer linear encodings of
piecewise-linear predicates, and linearize optimization models with them."""

from .lang import (
    Abs,
    Add,
    And,
    Arith,
    BoolExpr,
    BoolLit,
    Comparison,
    Const,
    Iff,
    Implies,
    Max,
    Min,
    ModelSpec,
    Mul,
    Neg,
    Not,
    Or,
    Sub,
    Var,
    VarDecl,
    eval_arith,
    eval_predicate,
    format_model,
    format_predicate,
    format_spec,
    free_vars,
    is_affine,
    rat_from_str,
    rat_to_str,
)
from .parser import DslError, ParseError, TypeCheckError, parse_model, parse_spec
from .reduction import (
    DimensionMismatch,
    Reduction,
    encodes_at,
    normalize_reduction,
    pad_duplicate_row,
    pad_zero_aux,
    reduction_from_json,
    reduction_to_json,
)
from .smt import (
    SmtQuery,
    SolverConfig,
    SolverFailure,
    SolverResult,
    default_solver_command,
    run_query,
)
from .cegis import (
    CegisConfig,
    ExhaustedLattice,
    SampleSet,
    SynthesisSuccess,
    SynthesisUnknown,
    cegis_synthesize,
    replay_check,
)
from .verify import (
    BudgetExceeded,
    Refuted,
    Unknown,
    Valid,
    brute_force_verify,
    cross_check,
    verify_reduction,
)
from .transform import (
    LinearModel,
    LinearRow,
    SynthesisFailed,
    emit_lp,
    grid_optimum,
    lift_objective,
    linear_grid_optimum,
    linearize_model,
)

__version__ = "0.1.0"
