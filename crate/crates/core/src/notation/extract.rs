use serde::Serialize;

/// One fenced block found in a reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock<'a> {
    /// The info string after the opening fence, trimmed.
    pub info: &'a str,
    /// Lines between the fences, joined with `\n`.
    pub interior: String,
    /// False when the reply ended before a closing fence.
    pub closed: bool,
}

/// Scans `text` for fenced blocks. A fence is three or more backticks at the
/// start of a line; it is closed by a line holding only at least as many
/// backticks.
pub fn fenced_blocks(text: &str) -> Vec<FencedBlock<'_>> {
    let mut blocks = Vec::new();
    let mut open: Option<(usize, &str, Vec<&str>)> = None;
    for line in text.lines() {
        let ticks = line.chars().take_while(|&c| c == '`').count();
        match open.take() {
            None => {
                if ticks >= 3 {
                    open = Some((ticks, line[ticks..].trim(), Vec::new()));
                }
            }
            Some((fence, info, mut lines)) => {
                if ticks >= fence && line[ticks..].trim().is_empty() {
                    blocks.push(FencedBlock { info, interior: lines.join("\n"), closed: true });
                } else {
                    lines.push(line);
                    open = Some((fence, info, lines));
                }
            }
        }
    }
    if let Some((_, info, lines)) = open {
        blocks.push(FencedBlock { info, interior: lines.join("\n"), closed: false });
    }
    blocks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no fenced block with the requested label")]
pub struct NotFound;

/// Interior of the first block whose info string equals `label`,
/// ignoring ASCII case.
pub fn extract_block(reply: &str, label: &str) -> Result<String, NotFound> {
    fenced_blocks(reply)
        .into_iter()
        .find(|b| b.info.eq_ignore_ascii_case(label))
        .map(|b| b.interior)
        .ok_or(NotFound)
}

/// Which extraction rule produced a [`Candidate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum Provenance {
    /// A block labeled `output`. `ambiguous` is set when more than one such
    /// block was present; the first one is used.
    Labeled { ambiguous: bool },
    /// The last fenced block, whatever its label.
    AnyFence,
    /// No fences at all: the whole reply, trimmed.
    WholeText,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub text: String,
    pub provenance: Provenance,
}

pub const OUTPUT_LABEL: &str = "output";

/// Picks the text most likely to hold the answer value.
pub fn extract_candidate_output(reply: &str) -> Candidate {
    let blocks = fenced_blocks(reply);
    let mut labeled = blocks.iter().filter(|b| b.info.eq_ignore_ascii_case(OUTPUT_LABEL));
    if let Some(first) = labeled.next() {
        return Candidate {
            text: first.interior.trim().to_string(),
            provenance: Provenance::Labeled { ambiguous: labeled.next().is_some() },
        };
    }
    if let Some(last) = blocks.last() {
        return Candidate { text: last.interior.trim().to_string(), provenance: Provenance::AnyFence };
    }
    Candidate { text: reply.trim().to_string(), provenance: Provenance::WholeText }
}
