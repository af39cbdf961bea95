"""Video-based reduced-order modeling.

From a video of a decaying vibration to a predictive model in four steps:
track a template to get motion signals, delay-embed them, fit a polynomial
invariant-manifold parameterization with its reduced dynamics, and transform
to a normal form whose polar coefficients give amplitude-dependent decay
rates, frequencies and trajectory predictions.
"""

from .config import PipelineConfig, config_snapshot, load_config, parse_config
from .document import (
    ModelDocument,
    file_sha256,
    load_document,
    make_provenance,
    normal_form_to_dict,
    reproducibility_hash,
    save_document,
)
from .dynamics import (
    AdvectResult,
    BackboneCurve,
    NormalFormModel,
    PolarModel,
    Prediction,
    ReducedModel,
    advect,
    amplitude_map,
    backbone_curves,
    fit_reduced_dynamics,
    normal_form,
    normal_form_from_polar,
    polar_decay,
    polar_frequency,
    predict_observable,
    reduced_rhs,
    resonant_exponents,
    to_polar,
)
from .embedding import (
    EmbeddedSeries,
    TimeSeries,
    center,
    delay_embed,
    estimate_derivative,
    leading_components,
    read_series_csv,
    tail_mean_offset,
    write_series_csv,
)
from .errors import (
    BoundsError,
    ConditioningError,
    ConfigError,
    DecodeError,
    DegenerateDataError,
    DivergenceError,
    EmbeddingWarning,
    ExtrapolationWarning,
    FitError,
    InputError,
    MatchError,
    NormalizationError,
    ShapeError,
    TrackingLostError,
    VidromError,
)
from .frames import (
    Frame,
    FrameSequence,
    Region,
    crop,
    decode_netpbm,
    encode_netpbm,
    load_frame_sequence,
    save_frame_directory,
    save_raw_sequence,
    to_grayscale,
    write_netpbm,
)
from .manifold import ManifoldModel, fit_manifold, parameterize, project
from .metrics import ErrorReport, channel_ranges, cnmte, ermse, nmte, report
from .polynomial import MultiIndexBasis, term_count
from .tracker import (
    Detection,
    SearchConfig,
    Template,
    TrackSeries,
    jaccard,
    match_sweep,
    nms,
    normalize_angle,
    nssd_map,
    read_track_csv,
    rotate_template,
    track,
    write_track_csv,
)

__version__ = "0.1.0"
