//! Shared domain types and record formats.

pub mod corpus;
pub mod io;
pub mod query;
pub mod record;
pub mod scene;
pub mod votes;
pub mod weights;

pub use corpus::{load_corpus, normalize, CorpusLoad, RawImage, RawObject, RawRelation, RecordError};
pub use io::{load_records, save_records, Record};
pub use query::{Captions, DescriptionPair, EditParams, EditQuery, EditType, SizeDirection};
pub use record::{keys, Criterion, CriterionScores, FeaturePair, MetricVector, SampleResult};
pub use scene::{AttributeCategory, BBox, ImageRecord, ObjectRelation, Relation, SceneObject};
pub use votes::{PreferenceRecord, SampleRef, Vote};
pub use weights::{GroupId, WeightConfig, WeightGroup, SUM_TOLERANCE};
