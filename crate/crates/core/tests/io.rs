//! Text and binary formats: layer graphs, parameter blobs, sequences.

use ccnn::nn::{convert_to_ccnn, LayerGraph, Mode};
use ccnn::trace::{lattice_sequence, stride3_reference_sequence, SamplerSequence};
use ccnn::{Error, Tensor};

const GRAPH: &str = "\
input c=1 h=16 w=16
conv out=4 k=3 stride=2 pad=1
bn c=4 eps=1e-5 momentum=0.1
relu
maxpool k=2 stride=2
dropout p=0.2
conv out=4 k=3 pad=1
gpool3d mode=avg
linear in=4 out=2
";

#[test]
fn converted_graph_survives_text_and_blob() {
    let g = convert_to_ccnn(&LayerGraph::from_text(GRAPH, 1).unwrap()).unwrap();
    let text = g.to_text();
    assert!(text.contains("sampler=checkered"), "{text}");

    let mut restored = LayerGraph::from_text(&text, 99).unwrap();
    assert_ne!(restored, g);
    restored.params_from_bytes(&g.params_to_bytes()).unwrap();
    assert_eq!(restored, g);

    let x = Tensor::uniform(&[1, 1, 16, 16], -1.0, 1.0, 2);
    assert_eq!(restored.forward(&x, Mode::Eval).unwrap(), g.forward(&x, Mode::Eval).unwrap());
}

#[test]
fn blob_for_a_different_graph_is_rejected() {
    let g = LayerGraph::from_text(GRAPH, 1).unwrap();
    let mut other = LayerGraph::from_text(&GRAPH.replace("out=4 k=3 pad=1", "out=3 k=3 pad=1").replace("in=4", "in=3"), 1).unwrap();
    assert!(other.params_from_bytes(&g.params_to_bytes()).is_err());
    assert!(other.params_from_bytes(b"not a blob").is_err());
}

#[test]
fn graph_parse_errors_carry_line_numbers() {
    let err = LayerGraph::from_text("input c=1 h=4 w=4\nrelu\nconv out=two k=3\n", 0).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
}

#[test]
fn sequence_text_format() {
    let seq: SamplerSequence = "0\n01\n\n0110\n".parse().unwrap();
    assert_eq!(seq.line_lengths(), vec![1, 2, 4]);
    assert_eq!(seq.to_string().parse::<SamplerSequence>().unwrap(), seq);
    let err = "0\n0x\n".parse::<SamplerSequence>().unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
}

#[test]
fn lattice_fixture_lines() {
    let seq = lattice_sequence(5).unwrap();
    let text = seq.to_string();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["0", "00", "0101", "01100011", "0010100101001010"]);
    assert_eq!(lattice_sequence(1).unwrap().to_string().trim(), "0");
    let full = lattice_sequence(10).unwrap();
    assert_eq!(full.line_lengths(), (0..10).map(|t| 1 << t).collect::<Vec<_>>());
    assert!(matches!(lattice_sequence(0), Err(Error::Unsupported(_))));
    assert!(matches!(lattice_sequence(11), Err(Error::Unsupported(_))));
    assert_eq!(stride3_reference_sequence().line_lengths(), vec![1, 3, 9, 27]);
}
