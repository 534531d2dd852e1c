"""Map algebra: majority blocks, layered gates, interleaving and densification."""
from .descriptors import (
    BINARY,
    PAIR,
    CellRule,
    Densify,
    GDelta,
    Interleave,
    LayeredMaj,
    Maj,
    MapDescriptor,
    Progression,
    build_F,
    build_M,
    build_M_IE,
    decode,
    densify,
    encode,
    interleave,
    is_layered,
    iter_nodes,
    neighborhood,
    rule_eval,
)
from .layout import ELayout, build_e_layout, cone_block, depth_of, phi, phi_inv
from .schedules import (
    GDeltaSpec,
    IntervalSchedule,
    OpenSetSchedule,
    OpenSetSpec,
    TargetSchedule,
    schedule_for_open_set,
    schedule_for_target,
)
from .serialize import dumps, load, load_gdelta, loads, parse_gdelta, save
