"""conceptdiff: explain what separates two sets of tagged items by inducing
class expressions over a background class hierarchy.

The pipeline: ingest a (possibly cyclic) class hierarchy and repair it into
a DAG, materialize ancestor closures and individual memberships, search a
bounded space of class expressions ranked by precision/recall/F1 against
positive and negative example sets, assemble explanations (machine, pooled
human, and shuffled-baseline kinds, with an optional concreteness filter),
cross-validate a tag-vector logistic classifier whose confusion groups feed
back into explanation, and evaluate preferences and discrimination with
Bradley-Terry and signal-detection fits.
"""

__version__ = "0.1.0"

from .analysis import (
    BTFit,
    PairwiseTally,
    SDTEstimate,
    choice_probability,
    fit_bradley_terry,
    normal_quantile,
    sdt_estimate,
)
from .classifier import (
    ConfusionGroups,
    FoldPredictions,
    Item,
    TagLogisticRegression,
    TagVectorizer,
    confusion_groups,
    kfold_eval,
    load_items,
    prepare_dataset,
    sample_group,
    vectorize,
)
from .errors import ConceptDiffError
from .explain import (
    ConcretenessTable,
    Explanation,
    RaterLists,
    alphabetize,
    assemble_machine_explanation,
    load_concreteness,
    pool_gold_standard,
    semi_random_baseline,
)
from .induction import (
    CandidateConcept,
    ConceptInducer,
    ScoredConcept,
    ScoreSet,
    candidate_covers,
    exhaustive_induce,
    induce,
    score,
)
from .membership import (
    AnnotateClient,
    LabelMapping,
    MembershipIndex,
    covers,
    load_memberships,
    map_labels,
)
from .store import IndexBundle, load_index, save_index
from .taxonomy import (
    ClosureIndex,
    EdgeList,
    Interner,
    Taxonomy,
    break_cycles,
    load_edges,
    materialize_closure,
    subsumes,
)

__all__ = [
    "__version__",
    "AnnotateClient", "BTFit", "CandidateConcept", "ClosureIndex",
    "ConceptDiffError", "ConceptInducer", "ConcretenessTable", "ConfusionGroups",
    "EdgeList", "Explanation", "FoldPredictions", "IndexBundle", "Interner",
    "Item", "LabelMapping", "MembershipIndex", "PairwiseTally", "RaterLists",
    "SDTEstimate", "ScoreSet", "ScoredConcept", "TagLogisticRegression",
    "TagVectorizer", "Taxonomy",
    "alphabetize", "assemble_machine_explanation", "break_cycles",
    "candidate_covers", "choice_probability", "confusion_groups", "covers",
    "exhaustive_induce", "fit_bradley_terry", "induce", "kfold_eval",
    "load_concreteness", "load_edges", "load_index", "load_items",
    "load_memberships", "map_labels", "materialize_closure", "normal_quantile",
    "pool_gold_standard", "prepare_dataset", "sample_group", "save_index",
    "score", "sdt_estimate", "semi_random_baseline", "subsumes", "vectorize",
]
