//! Semantic association networks: construction, filtering, structure and
//! between-network comparison.

mod compare;
mod network;
mod structure;

pub use compare::{
    align_labelings, ari, cluster_agreement, compare_centrality, louvain, node_edge_overlap, v_measure, write_partition,
    CentralityComparison, ClusterAgreement, Overlap, Partition, VMeasure, EXHAUSTIVE_MAX_NODES,
};
pub use network::{
    build_network, filter_lexicon, filter_network, filter_weight, load_wordlist, parse_wordlist, read_edge_list,
    write_edge_list, SemanticNetwork, WordEntry,
};
pub use structure::{degree_preserving_rewire, global_stats, small_world, GlobalStats, SmallWorldStats};
