"""EEG reading-feedback features and intent-weighted re-ranking.

Turns multi-channel EEG recorded while reading long documents into
relevance-feedback signals (preprocessing, sliding-window band-energy
features, linear-SVM feature elimination, threshold voting) and uses them to
drive an intent-weighted re-ranking engine, evaluated with a deterministic
session simulator.
"""

from .errors import ConfigurationError, DataError, EegRankError, TrainingError
from .features import (BandTable, DEFAULT_BANDS, DEFAULT_STATS, MODE_LITERAL,
                       MODE_RESOLUTION_AWARE, StatConfig, band_energies,
                       combine_stats, energy_density, extract_features,
                       feature_length, split_windows, window_spectrum)
from .model import (LabeledExample, LinearModel, Origin, ParagraphPredictor,
                    RfeConfig, RfeResult, Scaler, VotingConfig, judge_satisfaction,
                    predict_paragraph, rfe, split_by_task, standardize,
                    train_baselines, train_linear_svm)
from .preprocess import (PreprocessConfig, bandpass, baseline_correct, downsample,
                         has_artifact, preprocess, rereference, slice_by_events)
from .rerank import (IntentProfile, JudgmentLabel, RankingState, TaskLabels,
                     apply_feedback, new_session, rank_remaining, ranking_score,
                     select_candidate_pool, show)
from .segments import EegSegment, ParagraphEvent, SegmentMeta, load_segment, save_segment
from .simulate import (ClickStrategy, EegStrategy, MetricsReport, NoFeedbackStrategy,
                       SessionLog, click_feedback, compare_strategies, eeg_feedback,
                       evaluate_feedback, simulate_session)
from .synth import (SynthDataset, SynthSpec, burst_amplitude_for_contrast,
                    expected_noise_band_energy, synth_sessions, write_dataset)

__version__ = "0.1.0"
