use super::error::NoNetlistFound;
use super::parser::is_card_line;

/// Pulls the netlist out of a model response.
///
/// The last fenced code block wins when any fence is present. Otherwise the
/// longest run of consecutive card lines is returned (comment and
/// continuation lines may sit inside a run but do not count toward its length).
pub fn extract_netlist(llm_output: &str) -> Result<String, NoNetlistFound> {
    let lines: Vec<&str> = llm_output.lines().collect();
    let fences: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with("```"))
        .map(|(i, _)| i)
        .collect();
    if !fences.is_empty() {
        // Pair fences in order; an unterminated final fence runs to the end.
        let mut blocks = Vec::new();
        for pair in fences.chunks(2) {
            let start = pair[0] + 1;
            let end = pair.get(1).copied().unwrap_or(lines.len());
            blocks.push(lines[start..end].join("\n"));
        }
        if let Some(block) = blocks.into_iter().rev().find(|b| !b.trim().is_empty()) {
            return Ok(block.trim_matches('\n').to_string());
        }
    }

    let mut best: Option<(usize, usize, usize)> = None; // (cards, start, end)
    let mut run: Option<(usize, usize, usize)> = None;
    for (i, line) in lines.iter().enumerate() {
        let t = line.trim();
        if is_card_line(t) {
            run = Some(match run {
                Some((n, s, _)) => (n + 1, s, i + 1),
                None => (1, i, i + 1),
            });
        } else if run.is_some() && (t.starts_with('*') || t.starts_with('+')) {
            if let Some(r) = run.as_mut() {
                r.2 = i + 1;
            }
        } else {
            if let Some(r) = run.take() {
                if best.is_none_or(|b| r.0 > b.0) {
                    best = Some(r);
                }
            }
        }
    }
    if let Some(r) = run.take() {
        if best.is_none_or(|b| r.0 > b.0) {
            best = Some(r);
        }
    }
    match best {
        Some((_, start, end)) => Ok(lines[start..end].join("\n")),
        None => Err(NoNetlistFound),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_block() {
        let text = "Here is the circuit:\n```\nR1 1 0 1k\n.end\n```";
        assert_eq!(extract_netlist(text).unwrap(), "R1 1 0 1k\n.end");
    }

    #[test]
    fn last_fence_wins() {
        let text = "```spice\nR1 a 0 1\n```\nrevised:\n```spice\nR2 b 0 2\n.end\n```\nthanks";
        assert_eq!(extract_netlist(text).unwrap(), "R2 b 0 2\n.end");
    }

    #[test]
    fn bare_cards_in_prose() {
        let text = "Sure. The divider is\nV1 in 0 10\nR1 in mid 1k\nR2 mid 0 1k\n.op\n.end\nHope this helps.\nR9 x 0 1k";
        assert_eq!(
            extract_netlist(text).unwrap(),
            "V1 in 0 10\nR1 in mid 1k\nR2 mid 0 1k\n.op\n.end"
        );
    }

    #[test]
    fn pure_prose() {
        assert_eq!(
            extract_netlist("I cannot help with that circuit, sorry."),
            Err(NoNetlistFound)
        );
    }
}
