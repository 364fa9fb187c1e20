//! Edit-query generation: statistics, per-type generators and balancing.

pub mod balance;
pub mod generate;
pub mod options;
pub mod stats;

pub use balance::{balance_pool, BalanceConfig, BalanceReport, Shortfall};
pub use generate::{
    background_pool, check_feasible, gen_addition, gen_attribute_change, gen_background_change, gen_removal,
    gen_replacement, gen_resizing, gen_style_change, generate_for_image, generate_queries,
    rank_backgrounds, GenerationInputs, QueryConfig,
};
pub use options::{OptionSets, BACKGROUNDS, STYLES};
pub use stats::{build_stats, RelationStats};
