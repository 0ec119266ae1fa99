//! Line-oriented question loop over one memory.

use std::io::{BufRead, Write};

use crate::api::AskRequest;
use crate::runtime::Runtime;

pub const QUIT: &str = ":quit";

/// Reads questions until `:quit` or end of input. Each answer block is
/// followed by a blank line. Returns the number of questions answered.
pub fn run<R: BufRead, W: Write>(rt: &Runtime, k: Option<usize>, input: R, mut out: W) -> std::io::Result<usize> {
    let mut answered = 0;
    for line in input.lines() {
        let line = line?;
        let q = line.trim();
        if q == QUIT {
            break;
        }
        if q.is_empty() {
            continue;
        }
        let req = AskRequest {
            question: q.to_string(),
            k,
            video_id: None,
        };
        match rt.ask(&req) {
            Ok(resp) => {
                write!(out, "{}", resp.render())?;
                answered += 1;
            }
            Err(e) => writeln!(out, "error: {e}")?,
        }
        writeln!(out)?;
        out.flush()?;
    }
    Ok(answered)
}
