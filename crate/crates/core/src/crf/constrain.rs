use super::TransitionMatrix;
use crate::corpus::{Tag, TagSet};
use crate::scalar::Scalar;

/// Copy of `trans` with every BIO-invalid transition set to −∞: `I-c` may
/// only follow `B-c` or `I-c`, and never the start state.
pub fn constrain_transitions<T: Scalar>(trans: &TransitionMatrix<T>, tagset: &TagSet) -> TransitionMatrix<T> {
    assert_eq!(trans.num_tags(), tagset.len(), "transition matrix does not match tag set");
    let mut out = trans.clone();
    for to in 0..tagset.len() {
        let Tag::Inside(class) = tagset.decode(to) else { continue };
        out.forbid(out.start(), to);
        for from in 0..tagset.len() {
            let ok = matches!(tagset.decode(from), Tag::Begin(c) | Tag::Inside(c) if c == class);
            if !ok {
                out.forbid(from, to);
            }
        }
    }
    out
}
