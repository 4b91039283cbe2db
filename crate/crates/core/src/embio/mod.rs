//! On-disk formats: text embeddings, the binary factorized container,
//! frequency tables, JSON reports, corpora and loss curves.

mod container;
mod tables;
mod text;

pub use container::{decode, encode, read_factorized, write_factorized, MAGIC, VERSION};
pub use tables::{
    format_curve_csv, object, parse_curve_csv, read_corpus, read_frequencies, read_report_json, reports_to_json,
    round_sig6, write_corpus, write_curve_csv, write_frequencies, write_report_json, FrequencyTable, CURVE_HEADER,
};
pub use text::{
    default_tokens, format_embedding_text, parse_embedding_text, read_embedding_text, write_embedding_text, TEXT_DIGITS,
};
