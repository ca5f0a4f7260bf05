"""Distributed scalar quantization with low-rate intersensor chatting.

The package designs, analyzes, and simulates sensor networks where each
node scalar-quantizes its observation for a fusion center computing a
function of all sources, after exchanging a few bits with its neighbors.
High-resolution theory drives the design (optimal point densities, rate
allocation across links, closed-form distortion laws); a deterministic
Monte Carlo engine checks the predictions end to end.
"""

from .probcore import (
    GriddedFunction,
    Pdf,
    binary_entropy,
    differential_entropy,
    integrate_adaptive,
    quasi_norm_one_third,
)
from .quantizer import (
    Compressor,
    InfeasibleCodebookError,
    PointDensity,
    Quantizer,
    build_fixed_rate_quantizer,
    compressor_from_density,
    output_entropy,
    refine_codewords_conditional_mean,
)
from .sensitivity import (
    MessageDistribution,
    SensitivityProfile,
    max_conditional_sensitivity,
    max_sensitivity,
    sensitivity_monte_carlo,
    serial_max_message_distribution,
)
from .distortion import (
    ENTROPY_CONSTRAINED,
    FIXED_RATE,
    DistortionReport,
    EntropyCodingTable,
    InfeasibleRateError,
    UndefinedDistortionError,
    beta_fixed_rate,
    closed_form_max_nochat,
    entropy_coding_tables,
    fixed_rate_betas,
    fixed_rate_message_moments,
    hr_fmse_entropy_chat,
    hr_fmse_fixed_rate_chat,
    hr_mse,
    optimal_density_entropy,
    optimal_density_fixed_rate,
)
from .allocation import (
    AllocationResult,
    InfeasibleBudgetError,
    NonInteriorAllocationError,
    chat_budget_search,
    closed_form_allocation,
    entropy_allocation,
    probabilistic_allocation,
    waterfill_kkt,
)
from .chatnet import (
    ChatEdge,
    ChatGraph,
    ChatNetworkSpec,
    ChatState,
    NetworkDesign,
    Schedule,
    SpecFormatError,
    Violation,
    build_banks,
    conditional_quantizer_bank,
    design_network,
    out_message_table,
    parse_spec_file,
    serial_max_chat_round,
    validate_identifiable,
)
from .simulator import (
    CONDITIONAL_EXPECTATION,
    PLUG_IN,
    SimulationResult,
    decode,
    measure_entropy_rate,
    replay_codebooks,
    run_simulation,
)
from .experiments import (
    SweepSpec,
    allocation_report,
    run_scenarios,
    standard_figures,
    sweep_chatting_rate,
    sweep_partition,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "ChatEdge",
    "ChatGraph",
    "ChatNetworkSpec",
    "ChatState",
    "Compressor",
    "CONDITIONAL_EXPECTATION",
    "DistortionReport",
    "ENTROPY_CONSTRAINED",
    "EntropyCodingTable",
    "FIXED_RATE",
    "GriddedFunction",
    "InfeasibleBudgetError",
    "InfeasibleCodebookError",
    "InfeasibleRateError",
    "MessageDistribution",
    "NetworkDesign",
    "NonInteriorAllocationError",
    "PLUG_IN",
    "Pdf",
    "PointDensity",
    "Quantizer",
    "Schedule",
    "SensitivityProfile",
    "SimulationResult",
    "SpecFormatError",
    "SweepSpec",
    "UndefinedDistortionError",
    "Violation",
    "allocation_report",
    "beta_fixed_rate",
    "binary_entropy",
    "build_banks",
    "build_fixed_rate_quantizer",
    "chat_budget_search",
    "closed_form_allocation",
    "closed_form_max_nochat",
    "compressor_from_density",
    "conditional_quantizer_bank",
    "decode",
    "design_network",
    "differential_entropy",
    "entropy_allocation",
    "entropy_coding_tables",
    "fixed_rate_betas",
    "fixed_rate_message_moments",
    "hr_fmse_entropy_chat",
    "hr_fmse_fixed_rate_chat",
    "hr_mse",
    "integrate_adaptive",
    "max_conditional_sensitivity",
    "max_sensitivity",
    "measure_entropy_rate",
    "optimal_density_entropy",
    "optimal_density_fixed_rate",
    "out_message_table",
    "output_entropy",
    "parse_spec_file",
    "probabilistic_allocation",
    "quasi_norm_one_third",
    "refine_codewords_conditional_mean",
    "replay_codebooks",
    "run_scenarios",
    "run_simulation",
    "sensitivity_monte_carlo",
    "serial_max_chat_round",
    "serial_max_message_distribution",
    "standard_figures",
    "sweep_chatting_rate",
    "sweep_partition",
    "validate_identifiable",
    "waterfill_kkt",
    "write_csv",
]
