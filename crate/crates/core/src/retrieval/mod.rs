//! Gallery index, brute-force ranking and query expansion.

mod index;
mod qe;
mod rank;

pub use index::{build_index, GalleryIndex, RIDX_MAGIC, RIDX_VERSION};
pub use qe::{expand_query, QeVariant};
pub use rank::{rank_db_regions, rank_plain, squared_l2, RankedEntry, RankedList, RetrievalMode};
