// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;

use proptest::prelude::*;
use rtleval_core::taxonomy::{classify_failure, FailureSubtype, Rule, RuleSet};
use rtleval_core::toolchain::SynthOutcome;

fn corpus() -> Vec<(FailureSubtype, String, String)> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/diagnostics");
    let mut out = Vec::new();
    for dir in fs::read_dir(&root).unwrap() {
        let dir = dir.unwrap().path();
        let label: FailureSubtype = dir.file_name().unwrap().to_str().unwrap().parse().unwrap();
        for f in fs::read_dir(&dir).unwrap() {
            let f = f.unwrap().path();
            out.push((label, f.display().to_string(), fs::read_to_string(&f).unwrap()));
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1));
    out
}

fn error(d: &str) -> SynthOutcome {
    SynthOutcome::Error {
        diagnostics: d.to_string(),
    }
}

#[test]
fn corpus_is_large_enough() {
    let c = corpus();
    assert!(c.len() >= 18);
    for sub in FailureSubtype::ALL {
        if sub != FailureSubtype::SynthesisTimeout {
            assert!(c.iter().filter(|(l, ..)| *l == sub).count() >= 2, "{sub}");
        }
    }
}

#[test]
fn corpus_labels_agree() {
    let rules = RuleSet::builtin();
    for (label, path, text) in corpus() {
        let tag = classify_failure(&error(&text), &rules).unwrap();
        assert_eq!(tag.subtype, label, "{path}");
        if label != FailureSubtype::Unclassified {
            assert!(!tag.evidence.is_empty(), "{path}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn appended_rule_keeps_existing_tags(pattern in "[a-zA-Z ]{1,12}",
                                         sub in prop::sample::select(FailureSubtype::ALL[1..8].to_vec())) {
        let base = RuleSet::builtin();
        let mut extended = base.clone();
        extended.push(Rule::new(sub, &[&regex::escape(&pattern)]).unwrap());
        for (_, _, text) in corpus() {
            let before = classify_failure(&error(&text), &base).unwrap();
            let after = classify_failure(&error(&text), &extended).unwrap();
            if before.subtype != FailureSubtype::Unclassified {
                prop_assert_eq!(before, after);
            }
        }
    }
}
