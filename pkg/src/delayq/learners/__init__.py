from .mlp import Adam, MlpParams, dqn_train_step, encode_inventory, mlp_forward  # noqa: F401
from .mpc import DcmWorldModel, MpcPolicy, mpc_select_action  # noqa: F401
from .replay import (  # noqa: F401
    MaturityBuffer,
    ReplayBuffer,
    TransitionRecord,
    doubly_robust_target,
    impute_synthetic_transition,
    maturity_buffer_admit,
)
from .tabular import QTable, epsilon_greedy, tabular_q_update  # noqa: F401
from .training import (  # noqa: F401
    METHODS,
    VARIANTS,
    DqnAgent,
    DqnPolicy,
    EvalStats,
    MpcPolicy as _MpcPolicy,
    TabularAgent,
    TabularPolicy,
    TrainConfig,
    TrainResult,
    evaluate_policy,
    run_training,
    save_curve_csv,
    save_qtable_csv,
    load_qtable_csv,
    train_agent,
)
