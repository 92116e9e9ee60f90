"""Two-channel vital-sign event detection: framing, class rebalancing,
three trainable classifiers, Fowlkes-Mallows scoring, and patient-wise
leave-one-out evaluation on seeded synthetic cohorts."""

__version__ = "0.1.0"

from .ann import AnnModel, AnnTrainConfig, ann_forward, ann_gradient, ann_init, ann_train
from .dataset import (
    LabeledSet,
    Normalizer,
    apply_normalizer,
    assemble,
    balance_by_duplication,
    concat,
    encode_targets,
    fit_normalizer,
    loo_partitions,
    split_stratified,
)
from .errors import (
    NoPositivesError,
    RecordFormatError,
    SolverError,
    ToolkitError,
    TrainingError,
)
from .evaluation import (
    CohortReport,
    HarnessConfig,
    TrialResult,
    emit_pr_plane,
    format_summary_table,
    run_loo,
)
from .framing import FrameConfig, Label, LabeledFrame, extract_frames, label_for_frame
from .metrics import (
    ConfusionCounts,
    confusion_counts,
    confusion_from_masks,
    fm_index,
    precision_recall,
    summarize_trials,
)
from .numerics import (
    AdmmConfig,
    admm_constrained_ls,
    project_frobenius_ball,
    regularized_least_squares,
    relu,
    seeded_random_matrix,
)
from .pln import PlnConfig, PlnModel, grow_layer, init_base_layer, pln_predict, train_pln
from .records import (
    PatientRecord,
    Sample,
    load_cohort,
    load_patient_csv,
    save_cohort,
    save_patient_csv,
    validate_record,
)
from .serialize import ModelFormatError, load_model, save_model
from .svm import SvmModel, SvmTrainConfig, kernel_gaussian, svm_predict, svm_train
from .synth import SynthConfig, easy_cohort_config, generate_cohort, inject_event
