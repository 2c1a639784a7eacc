use super::JudgeError;

pub const INSTRUCTION_SLOT: &str = "{{Instruction}}";
pub const OUTPUT_SLOT: &str = "{{Output}}";

/// Rubric prompt with a 1-4 quality scale, 1 best.
pub const TEMPLATE: &str = "\
You will be given an instruction-output pair. Your task is to rate the responses on one metric.

Please make sure you read and understand these instructions carefully. Please keep this document open while reviewing, and refer to it as needed.

Evaluation Criteria:
Overall Quality (1-4) - how well does the output complete the instruction?
- A score of 1 means that the response is valid and satisfying. It follows the instruction, properly completes it and does not contain any repetitions or irrelevant parts.
- A score of 2 means that the response is acceptable but has minor errors or imperfections. It may contain factual inconistensies or grammatical errors.
- A score of 3 means that the response is relevant and responds to the instruction, but it has significant errors in the content. For example, the output may be valid in the beginning, but contains repetitions or followed by irrelevant things afterwards.
- A score of 4 means that the response is irrelevant or completely invalid, i.e. consists of repeating sequences or does not correspond to the instruction in any way.

Evaluation Steps:
1. Read the instruction and the corresponding output carefully.
2. Rate the output on a scale of 1-4 for Quality, according to the criteria above.

### Instruction:
{{Instruction}}
### Corresponding Output:
{{Output}}

Evaluation Form (scores ONLY):
- Quality:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgePrompt {
    pub rendered_text: String,
    pub instruction_id: String,
    pub model_id: String,
}

/// Renders the rubric for one instruction-output pair.
///
/// A non-empty instance input goes on its own line after the instruction.
/// Substitution is a single pass: placeholder text inside the substituted
/// values is left alone.
pub fn build_prompt(
    instruction: &str,
    instance_input: Option<&str>,
    output: &str,
) -> Result<String, JudgeError> {
    if instruction.trim().is_empty() {
        return Err(JudgeError::EmptyInstruction);
    }
    let mut slot = instruction.to_string();
    if let Some(input) = instance_input.filter(|s| !s.is_empty()) {
        slot.push('\n');
        slot.push_str(input);
    }
    let (head, rest) = TEMPLATE
        .split_once(INSTRUCTION_SLOT)
        .expect("template has an instruction slot");
    let (middle, tail) = rest
        .split_once(OUTPUT_SLOT)
        .expect("template has an output slot");
    let mut out = String::with_capacity(TEMPLATE.len() + slot.len() + output.len());
    out.push_str(head);
    out.push_str(&slot);
    out.push_str(middle);
    out.push_str(output);
    out.push_str(tail);
    Ok(out)
}

/// Extracts the 1-4 score from a judge reply.
///
/// Looks at the text after the last "Quality" (any case) and takes the first
/// integer there. A reply without the marker is accepted only when it starts
/// with the integer, as replies to the trailing "- Quality:" often do.
pub fn parse_score(reply: &str) -> Result<u8, JudgeError> {
    const MARKER: &str = "quality";
    let marker = (0..reply.len()).rev().find(|&i| {
        reply
            .get(i..i + MARKER.len())
            .is_some_and(|w| w.eq_ignore_ascii_case(MARKER))
    });
    let tail = match marker {
        Some(pos) => &reply[pos + MARKER.len()..],
        None => {
            let t = reply.trim_start().trim_start_matches('-').trim_start();
            if !t.starts_with(|c: char| c.is_ascii_digit()) {
                return Err(JudgeError::Unparseable(reply.to_string()));
            }
            t
        }
    };
    let start = tail
        .find(|c: char| c.is_ascii_digit())
        .ok_or_else(|| JudgeError::Unparseable(reply.to_string()))?;
    let digits: String = tail[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    match digits.parse::<u64>() {
        Ok(n @ 1..=4) => Ok(n as u8),
        Ok(n) => Err(JudgeError::OutOfRange(n)),
        Err(_) => Err(JudgeError::Unparseable(reply.to_string())),
    }
}
