from .tree import (
    Cost,
    Index,
    IndexSettings,
    IndexStats,
    InnerNode,
    LeafNode,
    SearchResult,
    VectorStore,
    Violation,
    build_static,
    check_consistency,
    format_pos,
    insert,
    parse_pos,
    search,
    stats,
)
from .persist import IndexFormatError, load_index, save_index
