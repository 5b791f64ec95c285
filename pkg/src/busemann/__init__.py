"""Hyperbolic classification with prototypes fixed on the ideal boundary of
the Poincaré ball, trained with the penalized Busemann loss."""

from .errors import BusemannError, DomainError, FormatError, InvalidInputError, NumericError
from .geometry import (EPS_BALL, busemann, busemann_limit, exp0, geodesic_distance, geodesic_ray,
                       ideal_point, project_to_ball)
from .loss import (LossGradient, PenaltyConfig, batch_loss, density_radial_integral, loss_gradient,
                   penalized_busemann_loss, phi_linear)
from .prototypes import (IdealPrototype, PrototypeSet, Provenance, project_to_boundary,
                         separation_metrics, separation_prototypes, uniform_circle_prototypes)
from .data_io import Dataset, SplitSpec, load_csv, load_idx, split, synthetic_blobs
from .model import (AdamState, Layer, Model, Prediction, TrainConfig, TrainHistory, adam_step,
                    backward, forward, init_model, logreg_equivalence_check, predict, train)

__version__ = "0.1.0"
