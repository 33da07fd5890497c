//! Allocation audit: when enabled on the current thread, every tensor buffer created
//! records its shape so tests can check the model's memory contract.

use std::cell::RefCell;

thread_local! {
    static SHAPES: RefCell<Option<Vec<Vec<usize>>>> = const { RefCell::new(None) };
}

pub(crate) fn record(shape: &[usize]) {
    SHAPES.with(|s| {
        if let Some(v) = s.borrow_mut().as_mut() {
            v.push(shape.to_vec());
        }
    });
}

/// Run `f` with the audit enabled and return its result together with every tensor
/// shape allocated on this thread while it ran.
pub fn audit_allocations<T>(f: impl FnOnce() -> T) -> (T, Vec<Vec<usize>>) {
    let prev = SHAPES.with(|s| s.borrow_mut().replace(Vec::new()));
    let out = f();
    let shapes = SHAPES.with(|s| {
        let mut s = s.borrow_mut();
        let got = s.take().unwrap_or_default();
        *s = prev;
        got
    });
    (out, shapes)
}
