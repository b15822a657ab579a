//! Prompt assembly for first and follow-up rounds.

use serde::{Deserialize, Serialize};

use crate::script::fixtures::EXAMPLES;

pub const TOOL_PREAMBLE: &str = "You are an professional audio editor. Try to follow the instruction I give using several predefined tools:
LEN(wav) # returns the duration of `wav` in seconds
MIX(wavs: list[tuple])  # returns the mixture of the input `wavs`
CAT(wavs: list)  # returns the concatenated wav using input `wavs`
SPLIT(wav, break_points=list[float]) # returns the split wavs using `break_points`
ADJUST_VOL(wav, volume: int)  # returns the adjusted wav by `volume`
TTA(text: str, length: float, volume: int)  # returns a generated audio conditioned on `text`
TTM(text: str, melody, length: float, volume: int)  # returns a generated music conditioned on `text` and (optional) `melody`
TTS(text: str, volume: int)  # returns a generated speech conditioned on `text` and `speaker`. `speaker` should be in ['Male1_En', 'Male2_En', 'Female1_En', 'Female2_En']
SR(wav, ddim_steps: int, guidance_scale: float, seed: int)  # Returns a wav upsampled to 48kHz
TSS(wav, text: str)  # returns foreground and background wav conditioned on `text`
ADD_NOISE(wav, min_snr_db: float, max_snr_db: float)  # returns a generated audio mixed with gaussian noise
LOW_PASS(wav, min_cutoff_freq: float, max_cutoff_freq: float, min_rolloff: int, max_rolloff: int)  # returns a generated audio processed by low pass filter
HIGH_PASS(wav, min_cutoff_freq: float, max_cutoff_freq: float, min_rolloff: int, max_rolloff: int)  # returns a generated audio processed by high pass filter
ADD_RIR(wav, ir)  # returns a generated audio mixed with a given room impulse response
ROOM_SIMULATE(wav, min_size_x: float, max_size_x: float, min_size_y: float, max_size_y: float, min_size_z: float, max_size_z: float, min_absorption_value: float, max_absorption_value: float, min_source_x: float, max_source_x: float, min_source_y: float, max_source_y: float, min_source_z: float, max_source_z: float, min_mic_distance: float, max_mic_distance: float, min_mic_azimuth: float, max_mic_azimuth: float, min_mic_elevation: float, max_mic_elevation: float)  # returns a synthesized audio by mixing the input `wav` with a room-specific synthesized impulse response
INPAINT(wav, text: str, onset: float, offset: float, duration: float)  # returns a fixed audio where the part between `onset` and `offset` has been inpainted


I will give you several examples:
";

pub const FOLLOWUP_TEXT: &str = "Regenerate the code by appending the new instruction to the previous instructions. The code must start with the provided audio (e.g., INPUT_WAV0) and cannot take the output from previous phase (i.e., `OUTPUT_WAV`) as a known input. The new instruction is:";

pub const SCRIPTWRITING_TEXT: &str =
    "Before the code, write a short audio script as comment lines describing the story the sounds should tell, then write the code that realizes it.";

/// Message sent after a response whose code failed to parse or validate.
pub fn repair_message(diagnostics: &str) -> String {
    format!("The previous code failed validation: {diagnostics}. Regenerate.")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    /// Tool list and worked examples.
    pub system_preamble: String,
    /// One `INPUT_WAVn: caption` line per input.
    pub audio_context: String,
    /// Previous instructions, one per line, for follow-up rounds.
    pub prior_instructions: Vec<String>,
    pub followup_prefix: Option<String>,
    pub instruction: String,
}

impl PromptBundle {
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.system_preamble.len() + 512);
        out.push_str(&self.system_preamble);
        out.push('\n');
        out.push_str(&self.audio_context);
        out.push_str("Instruction:\n");
        for prior in &self.prior_instructions {
            out.push_str(prior);
            out.push('\n');
        }
        if let Some(prefix) = &self.followup_prefix {
            out.push_str(prefix);
            out.push('\n');
        }
        out.push_str(&self.instruction);
        out.push_str("\nCode:");
        out
    }
}

/// Tool list followed by every worked example.
pub fn system_preamble(scriptwriting: bool) -> String {
    let examples: Vec<String> =
        EXAMPLES.iter().map(|e| format!("Instruction:\n{}\nCode:\n{}", e.instruction, e.code)).collect();
    let mut out = format!("{TOOL_PREAMBLE}{}", examples.join("\n"));
    if scriptwriting {
        out.push('\n');
        out.push_str(SCRIPTWRITING_TEXT);
    }
    out
}

pub fn audio_context(captions: &[(String, String)]) -> String {
    captions.iter().map(|(name, caption)| format!("{name}: {caption}\n")).collect()
}

pub fn first_prompt_bundle(captions: &[(String, String)], instruction: &str, scriptwriting: bool) -> PromptBundle {
    PromptBundle {
        system_preamble: system_preamble(scriptwriting),
        audio_context: audio_context(captions),
        prior_instructions: Vec::new(),
        followup_prefix: None,
        instruction: instruction.trim().to_string(),
    }
}

/// First-round prompt for inputs captioned `(name, caption)`.
pub fn build_first_prompt(captions: &[(String, String)], instruction: &str) -> String {
    first_prompt_bundle(captions, instruction, false).render()
}

pub fn followup_prompt_bundle(
    captions: &[(String, String)],
    prior_instructions: &[String],
    instruction: &str,
    scriptwriting: bool,
) -> PromptBundle {
    PromptBundle {
        prior_instructions: prior_instructions.iter().map(|s| s.trim().to_string()).collect(),
        followup_prefix: Some(FOLLOWUP_TEXT.to_string()),
        ..first_prompt_bundle(captions, instruction, scriptwriting)
    }
}

/// Prompt for a later round: the earlier instructions, then the follow-up
/// text, then the new instruction. Earlier code is not included.
pub fn build_followup_prompt(
    captions: &[(String, String)],
    prior_instructions: &[String],
    instruction: &str,
) -> String {
    followup_prompt_bundle(captions, prior_instructions, instruction, false).render()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn captions() -> Vec<(String, String)> {
        vec![("INPUT_WAV0".into(), "a dog barking".into()), ("INPUT_WAV1".into(), "rain".into())]
    }

    #[test]
    fn first_prompt_layout() {
        let prompt = build_first_prompt(&captions(), "Add rain behind the dog");
        assert!(prompt.starts_with("You are an professional audio editor."));
        assert!(prompt.ends_with("\nCode:"));
        assert!(prompt
            .contains("\nINPUT_WAV0: a dog barking\nINPUT_WAV1: rain\nInstruction:\nAdd rain behind the dog\nCode:"));
        for example in EXAMPLES {
            assert!(prompt.contains(example.code));
            assert!(prompt.contains(example.instruction));
        }
        assert!(!prompt.contains(FOLLOWUP_TEXT));
        assert_eq!(prompt, build_first_prompt(&captions(), "Add rain behind the dog"));
    }

    #[test]
    fn followup_prompt_layout() {
        let prior = vec!["Replace the speech".to_string(), "Remove 6-10s".to_string()];
        let prompt = build_followup_prompt(&captions(), &prior, "Add more cheers sound in the end");
        let a = prompt.find("Replace the speech").unwrap();
        let b = prompt.find("Remove 6-10s").unwrap();
        let c = prompt.find("Regenerate the code by appending the new instruction").unwrap();
        let d = prompt.find("Add more cheers sound in the end").unwrap();
        assert!(a < b && b < c && c < d);
        assert!(prompt.ends_with("Add more cheers sound in the end\nCode:"));
    }

    #[test]
    fn scriptwriting_variant_only_adds_a_sentence() {
        let plain = first_prompt_bundle(&captions(), "x", false).render();
        let story = first_prompt_bundle(&captions(), "x", true).render();
        assert_eq!(story.replace(&format!("\n{SCRIPTWRITING_TEXT}"), ""), plain);
    }

    #[test]
    fn zero_inputs() {
        let prompt = build_first_prompt(&[], "Generate rain");
        assert!(prompt.contains("OUTPUT_WAV = ROOM_SIMULATE"));
        assert!(prompt.ends_with("\nInstruction:\nGenerate rain\nCode:"));
    }
}
