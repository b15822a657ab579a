use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no code found")]
pub struct NoCodeFound;

/// Pulls the program text out of a model response.
///
/// Preference order: the first fenced block, then everything after a line
/// reading `Code:`, then the whole response. A later `Instruction:` line
/// ends the `Code:` section, since models sometimes continue the few-shot
/// pattern.
pub fn extract_code(response: &str) -> Result<String, NoCodeFound> {
    let lines: Vec<&str> = response.lines().collect();
    let body = if let Some(block) = fenced_block(&lines) {
        block
    } else if let Some(start) = lines.iter().position(|l| l.trim() == "Code:") {
        let rest = &lines[start + 1..];
        let end = rest.iter().position(|l| l.trim() == "Instruction:").unwrap_or(rest.len());
        rest[..end].to_vec()
    } else {
        lines
    };
    let first = body.iter().position(|l| !l.trim().is_empty());
    let last = body.iter().rposition(|l| !l.trim().is_empty());
    match (first, last) {
        (Some(a), Some(b)) => Ok(body[a..=b].join("\n")),
        _ => Err(NoCodeFound),
    }
}

fn fenced_block<'a>(lines: &[&'a str]) -> Option<Vec<&'a str>> {
    let open = lines.iter().position(|l| l.trim_start().starts_with("```"))?;
    let rest = &lines[open + 1..];
    let close = rest.iter().position(|l| l.trim() == "```").unwrap_or(rest.len());
    Some(rest[..close].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_block_wins() {
        let response = "Here you go:\n```python\n\nOUTPUT_WAV = MIX([(INPUT_WAV0, 0)])\n```\nCode:\nX = 1";
        assert_eq!(extract_code(response).unwrap(), "OUTPUT_WAV = MIX([(INPUT_WAV0, 0)])");
    }

    #[test]
    fn code_marker_layout() {
        let response = "Instruction:\nmake it louder\nCode:\n# louder\nOUTPUT_WAV = ADJUST_VOL(INPUT_WAV0, volume=3)\n\nInstruction:\nmore";
        assert_eq!(extract_code(response).unwrap(), "# louder\nOUTPUT_WAV = ADJUST_VOL(INPUT_WAV0, volume=3)");
    }

    #[test]
    fn whole_response_fallback_and_empty() {
        assert_eq!(extract_code("\n  A = 1  \n\n").unwrap(), "  A = 1  ");
        assert_eq!(extract_code("  \n\t\n"), Err(NoCodeFound));
        assert_eq!(extract_code("```\n\n```"), Err(NoCodeFound));
    }
}
