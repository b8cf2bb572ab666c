#![allow(dead_code)]

use guidetwig_core::document::{generate, GeneratorConfig};
use guidetwig_core::oracle::MaterializedDoc;
use guidetwig_core::workload::TwigShape;
use guidetwig_core::Index;

pub fn small_config(seed: u64, nodes: usize) -> GeneratorConfig {
    GeneratorConfig {
        max_depth: 7,
        max_fanout: 4,
        tag_alphabet: ["A", "B", "C"].map(String::from).to_vec(),
        seed,
        target_node_count: nodes,
    }
}

pub fn small_shape() -> TwigShape {
    TwigShape { tags: ["A", "B", "C"].map(String::from).to_vec(), max_depth: 5, ..TwigShape::default() }
}

pub fn index_for(config: &GeneratorConfig) -> (Index, MaterializedDoc) {
    let xml = generate(config).unwrap().xml;
    let index = Index::from_xml_bytes(&xml).unwrap();
    let doc = MaterializedDoc::from_events(guidetwig_core::document::ingest_bytes(&xml).unwrap());
    (index, doc)
}
