from .autodiff import (
    NonFiniteError,
    Var,
    add,
    affine_const,
    check_finite,
    concat,
    const,
    dense,
    gather_rows,
    mean,
    mean2,
    mul,
    param,
    pool_pair,
    pool_select,
    qerror,
    relu,
    scale,
    sigmoid,
    tanh,
    weighted_sum,
)
from .checkpoint import CheckpointError, load_params, save_params
from .gradcheck import grad_check
from .layers import DenseParams, LstmCellParams, apply_dense, init_cell, init_dense, lstm_cell
from .optim import Adam, AdamState, adam_step
