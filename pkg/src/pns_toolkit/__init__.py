"""Interventional effects and PNS bounds from discrete observational data."""

from .dataset import (
    DiscreteDataset,
    RawTable,
    RecodeRule,
    VariableSchema,
    apply_recode,
    drop_missing,
    dump_dataset,
    load_dataset,
    merge_by_key,
    parse_csv,
    parse_xpt,
    with_missing_codes,
)
from .errors import ToolkitError
from .estimate import Event, JointTable, do_adjust, marginalize, prob, tabulate
from .graph import CausalGraph, dump_graph_text, parse_graph
from .pns import (
    CausalQuantities,
    PnsInterval,
    PnsReport,
    StratumQuantities,
    adjusted_quantities,
    pns_bounds_thm1,
    pns_bounds_thm2,
    pns_bounds_tp,
    pns_report,
)
from .scm import (
    CounterfactualProfile,
    Mechanism,
    ScmSpec,
    enumerate_counterfactuals,
    random_scm,
    sample,
    stratified_counterfactuals,
)
from .subgroup import SubgroupReport, SubgroupSpec, analyze_subgroup, required_n, scan_subgroups

__version__ = "0.1.0"

__all__ = [
    "CausalGraph",
    "CausalQuantities",
    "CounterfactualProfile",
    "DiscreteDataset",
    "Event",
    "JointTable",
    "Mechanism",
    "PnsInterval",
    "PnsReport",
    "RawTable",
    "RecodeRule",
    "ScmSpec",
    "StratumQuantities",
    "SubgroupReport",
    "SubgroupSpec",
    "ToolkitError",
    "VariableSchema",
    "adjusted_quantities",
    "analyze_subgroup",
    "apply_recode",
    "do_adjust",
    "drop_missing",
    "dump_dataset",
    "dump_graph_text",
    "enumerate_counterfactuals",
    "load_dataset",
    "marginalize",
    "merge_by_key",
    "parse_csv",
    "parse_graph",
    "parse_xpt",
    "pns_bounds_thm1",
    "pns_bounds_thm2",
    "pns_bounds_tp",
    "pns_report",
    "prob",
    "random_scm",
    "required_n",
    "sample",
    "scan_subgroups",
    "stratified_counterfactuals",
    "tabulate",
    "with_missing_codes",
]
