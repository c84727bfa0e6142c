//! Loading the flattened dataset and its term annotations, flagging
//! redundant terms and building the person-centric view.

mod annotations;
mod dataset;
mod person;
mod redundancy;

pub use annotations::{load_annotations, AnnotationSet};
pub use dataset::{load_dataset, load_joined, Dataset, Row};
pub use person::{build_person_view, PersonView, QuasiAttribute};
pub use redundancy::{detect_redundant, match_value};
