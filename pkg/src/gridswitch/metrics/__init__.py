from gridswitch.metrics.flow import FarnebackParams, FlowField, farneback_flow, temporal_consistency, warp_error
from gridswitch.metrics.loss import RankedConfig, combined_loss
from gridswitch.metrics.report import MetricsReport, VideoMetrics, evaluate_video
from gridswitch.metrics.scores import clip_score, lpips
from gridswitch.metrics.ssim import ms_ssim, msssim_scale_count

__all__ = [
    "FarnebackParams",
    "FlowField",
    "MetricsReport",
    "RankedConfig",
    "VideoMetrics",
    "clip_score",
    "combined_loss",
    "evaluate_video",
    "farneback_flow",
    "lpips",
    "ms_ssim",
    "msssim_scale_count",
    "temporal_consistency",
    "warp_error",
]
