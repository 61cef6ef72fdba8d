//! Reading datasets and writing results.

pub mod dataset;
pub mod results;
pub mod svg;

pub use dataset::{read_dataset_csv, read_table, write_dataset_csv, ColumnSelector, Table};
pub use results::{read_results_json, write_results, write_smap, ResultsDoc, SmapDoc};
pub use svg::{indices_svg, separations_svg};
