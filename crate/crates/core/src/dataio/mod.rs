//! Parsing and validation of every external input.
//!
//! Formats: CSV for responses, item metadata and associations; CoNLL-U for
//! annotated text; JSONL for embeddings; flat text for lexicons and
//! construct dictionaries. All string tokens that enter network or lexical
//! analyses are lowercased here and nowhere else.

mod associations;
mod conllu;
mod embeddings;
mod lexical;
mod responses;

pub use associations::{
    load_association_file, write_associations, AssociationDataset, AssociationDescriptives, AssociationRecord,
};
pub use conllu::{
    attach_entity_spans, load_conllu, parse_conllu, validate_sentence, write_conllu, AnnotatedCorpus, Document,
    EntitySpan, Sentence, Token,
};
pub use embeddings::{load_embeddings, parse_embeddings, write_embeddings, EmbeddingStore};
pub use lexical::{
    load_dictionaries, load_dictionary, load_lexicon, parse_dictionaries, write_dictionary, write_lexicon,
    ConstructDictionary, Lexicon,
};
pub(crate) use responses::format_number;
pub use responses::{
    load_items, load_response_dataset, write_items, write_responses, Answer, ItemKind, ItemMeta, ItemSource,
    ResponseDataset, ResponseSchema,
};
