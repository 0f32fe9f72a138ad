"""Monte-Carlo simulation of receivers that undo third-order intermodulation
from strong adjacent-channel blockers, with conventional, neural-network
canceler and neural-network demodulator back ends."""

__version__ = "0.1.0"

from .frontend import FrontEndModel, alpha3_from_iip3, apply_nonlinearity, iip3_from_alphas
from .harness import BerRecord, StopRule, SweepSpec, run_point, sweep, theoretical_ber, write_csv
from .neuralnet import MlpConfig, MlpNetwork, TrainOptions, train_br
from .receivers import ReceiverKind, TrainedReceiver, detect, train_receiver
from .scenario import Scenario, simulate_link
from .sigproc import Modulation, PowerSpec, RngStream

__all__ = [
    "BerRecord",
    "FrontEndModel",
    "MlpConfig",
    "MlpNetwork",
    "Modulation",
    "PowerSpec",
    "ReceiverKind",
    "RngStream",
    "Scenario",
    "StopRule",
    "SweepSpec",
    "TrainOptions",
    "TrainedReceiver",
    "alpha3_from_iip3",
    "apply_nonlinearity",
    "detect",
    "iip3_from_alphas",
    "run_point",
    "simulate_link",
    "sweep",
    "theoretical_ber",
    "train_br",
    "train_receiver",
    "write_csv",
]
