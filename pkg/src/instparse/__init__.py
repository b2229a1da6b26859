"""Grid-based instance parsing: label assignment, prototype mask synthesis,
training losses, part-to-human grouping and multi-human parsing metrics."""

from .assign import DEFAULT_LEVELS, GridTargets, LevelSpec, activated_grids, build_targets, instance_scale, route_levels
from .grouping import GroupingConfig, assemble, matrix_nms, overlap_ratios, run_pipeline, select_parts
from .losses import LossReport, dice_loss, focal_loss, total_loss
from .masks import iou, mass_center_extent, threshold_map
from .metrics import GtHuman, ap_p, ap_p_vol, ap_r, ap_r_vol, mean_part_iou, pcp50
from .scenes import SceneConfig, generate_scene, oracle_outputs, perturb
from .structures import GroundTruthInstance, GroundTruthScene, ParsingResult, ScoredInstance
from .synthesis import combine_masks, decode, extract_candidates, segmentation_score

__version__ = "0.1.0"
