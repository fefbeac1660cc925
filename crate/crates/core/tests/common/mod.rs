#![allow(dead_code)]

use vasekit_core::manifest::{DatasetManifest, QAPair, QuestionType, VaseEntry, ViewRef};

pub fn qa(t: QuestionType, answer: &str) -> QAPair {
    QAPair {
        question_type: t,
        question: t.template().unwrap_or_else(|| "Describe this vase.".to_string()),
        answer: answer.to_string(),
    }
}

pub fn entry(id: &str, caption: &str, qas: Vec<QAPair>) -> VaseEntry {
    VaseEntry {
        vase_id: id.to_string(),
        views: vec![
            ViewRef { view_id: "front".into(), uri: format!("renders/{id}/front.png") },
            ViewRef { view_id: "side".into(), uri: format!("renders/{id}/side.png") },
        ],
        qa_pairs: qas,
        caption: caption.to_string(),
        split: None,
    }
}

/// Manifest with the published per-type question counts: every entry carries
/// fabric, technique, shape, caption and dating; all but one carry decoration;
/// 280 carry attribution and 197 provenance.
pub fn full_size_manifest() -> DatasetManifest {
    let entries = (0..664)
        .map(|i| {
            let mut qas = vec![
                qa(QuestionType::Fabric, "Attic"),
                qa(QuestionType::Technique, "red-figure"),
                qa(QuestionType::Shape, "amphora"),
                qa(QuestionType::Caption, "An Attic red-figure amphora."),
                qa(QuestionType::Dating, "ca. 450 BC"),
            ];
            if i != 0 {
                qas.push(qa(QuestionType::Decoration, "maenads"));
            }
            if i < 280 {
                qas.push(qa(QuestionType::Attribution, "Berlin Painter"));
            }
            if i >= 664 - 197 {
                qas.push(qa(QuestionType::Provenance, "Vulci"));
            }
            entry(&format!("vase-{i:04}"), "An Attic red-figure amphora.", qas)
        })
        .collect();
    DatasetManifest::new(entries, "synthetic")
}
