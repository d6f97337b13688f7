//! Prompt templates, language axes and paraphrase variants.
//!
//! Templates live in `resources/templates/` and are rendered by a single
//! left-to-right pass that replaces known `{name}` placeholders; substituted
//! text is never rescanned, so braces inside a spec are left alone.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TEMPLATE_L1: &str = include_str!("../resources/templates/l1.txt");
pub const TEMPLATE_L2_FEATURE: &str = include_str!("../resources/templates/l2_feature.txt");
pub const TEMPLATE_L2_ANSWER: &str = include_str!("../resources/templates/l2_answer.txt");
pub const TEMPLATE_L2_CAPTION: &str = include_str!("../resources/templates/l2_caption.txt");
pub const TEMPLATE_UTTERANCE_INSTRUCTIONS: &str =
    include_str!("../resources/templates/utterance_instructions.txt");
pub const TEMPLATE_UTTERANCE_COMBINE: &str =
    include_str!("../resources/templates/utterance_combine.txt");
pub const TEMPLATE_QUESTION: &str = include_str!("../resources/templates/question.txt");
pub const TEMPLATE_CODING: &str = include_str!("../resources/templates/coding.txt");
pub const TEMPLATE_PARAPHRASE_ONE: &str =
    include_str!("../resources/templates/paraphrase_one_axis.txt");
pub const TEMPLATE_PARAPHRASE_TWO: &str =
    include_str!("../resources/templates/paraphrase_two_axes.txt");
const AXES_RESOURCE: &str = include_str!("../resources/axes.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptTask {
    L1,
    L2Feature,
    L2Answer,
    L2Caption,
    UtteranceInstr,
    UtteranceCombine,
    Question,
    Coding,
    Paraphrase1,
    Paraphrase2,
}

impl PromptTask {
    pub fn template(self) -> &'static str {
        match self {
            PromptTask::L1 => TEMPLATE_L1,
            PromptTask::L2Feature => TEMPLATE_L2_FEATURE,
            PromptTask::L2Answer => TEMPLATE_L2_ANSWER,
            PromptTask::L2Caption => TEMPLATE_L2_CAPTION,
            PromptTask::UtteranceInstr => TEMPLATE_UTTERANCE_INSTRUCTIONS,
            PromptTask::UtteranceCombine => TEMPLATE_UTTERANCE_COMBINE,
            PromptTask::Question => TEMPLATE_QUESTION,
            PromptTask::Coding => TEMPLATE_CODING,
            PromptTask::Paraphrase1 => TEMPLATE_PARAPHRASE_ONE,
            PromptTask::Paraphrase2 => TEMPLATE_PARAPHRASE_TWO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub task: PromptTask,
    pub text: String,
    pub substitutions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt input `{0}` is empty")]
    EmptyInput(&'static str),
    #[error("stage `{0}` needs the output of the previous stage")]
    MissingStageInput(&'static str),
    #[error("score {0} is outside the 1..=5 Likert range")]
    InvalidScore(u8),
    #[error("axis {0:?} appears more than once")]
    DuplicateAxis(Axis),
    #[error("a paraphrase uses one or two axes with one score each (got {axes} axes, {scores} scores)")]
    AxisCount { axes: usize, scores: usize },
}

/// Placeholder names appearing in `template`, in order of first occurrence.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find(['}', '{', '\n']) {
            Some(close) if after.as_bytes()[close] == b'}' && close > 0 => {
                let name = &after[..close];
                if !out.contains(&name) {
                    out.push(name);
                }
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

/// Single-pass substitution. Unknown `{...}` sequences are copied verbatim.
pub fn render(task: PromptTask, subs: &[(&str, &str)]) -> RenderedPrompt {
    let template = task.template();
    let mut text = String::with_capacity(template.len() + subs.iter().map(|s| s.1.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            subs.iter().find(|(k, _)| *k == name).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                text.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                text.push('{');
                rest = after;
            }
        }
    }
    text.push_str(rest);
    RenderedPrompt {
        task,
        text,
        substitutions: subs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    }
}

fn non_empty(value: &str, name: &'static str) -> Result<(), PromptError> {
    if value.trim().is_empty() {
        Err(PromptError::EmptyInput(name))
    } else {
        Ok(())
    }
}

pub fn build_l1_prompt(minified_spec: &str, ftt: &str) -> Result<RenderedPrompt, PromptError> {
    non_empty(minified_spec, "vl")?;
    non_empty(ftt, "ftt_str")?;
    Ok(render(PromptTask::L1, &[("vl", minified_spec), ("ftt_str", ftt)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L2Stage<'a> {
    Feature,
    Answer { question: &'a str },
    Caption { info: &'a str },
}

/// The answer and caption stages both carry the field table.
pub fn build_l2_prompts(
    minified_spec: &str,
    ftt: &str,
    stage: L2Stage<'_>,
) -> Result<RenderedPrompt, PromptError> {
    non_empty(minified_spec, "vl")?;
    non_empty(ftt, "ftt_str")?;
    Ok(match stage {
        L2Stage::Feature => render(PromptTask::L2Feature, &[("vl", minified_spec)]),
        L2Stage::Answer { question } => {
            if question.trim().is_empty() {
                return Err(PromptError::MissingStageInput("l2_answer"));
            }
            render(PromptTask::L2Answer, &[("ftt_str", ftt), ("prompt", question)])
        }
        L2Stage::Caption { info } => {
            if info.trim().is_empty() {
                return Err(PromptError::MissingStageInput("l2_caption"));
            }
            render(PromptTask::L2Caption, &[("info", info), ("ftt_str", ftt)])
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtteranceStage<'a> {
    Instructions,
    Combine { inst_first_concat: &'a str },
}

pub fn build_utterance_prompts(
    minified_spec: &str,
    ftt: &str,
    stage: UtteranceStage<'_>,
) -> Result<RenderedPrompt, PromptError> {
    non_empty(minified_spec, "vl")?;
    Ok(match stage {
        UtteranceStage::Instructions => {
            non_empty(ftt, "ftt_str")?;
            render(PromptTask::UtteranceInstr, &[("vl", minified_spec), ("ftt_str", ftt)])
        }
        UtteranceStage::Combine { inst_first_concat } => {
            if inst_first_concat.trim().is_empty() {
                return Err(PromptError::MissingStageInput("utterance_combine"));
            }
            render(PromptTask::UtteranceCombine, &[("inst_first_concat", inst_first_concat)])
        }
    })
}

pub fn build_question_prompt(minified_spec: &str) -> Result<RenderedPrompt, PromptError> {
    non_empty(minified_spec, "vl")?;
    Ok(render(PromptTask::Question, &[("vl", minified_spec)]))
}

pub fn build_coding_prompt(sentence: &str) -> Result<RenderedPrompt, PromptError> {
    non_empty(sentence, "sent")?;
    Ok(render(PromptTask::Coding, &[("sent", sentence)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    Formality,
    Clarity,
    Expertise,
    Subjectivity,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Formality, Axis::Clarity, Axis::Expertise, Axis::Subjectivity];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Formality => "Formality",
            Axis::Clarity => "Clarity",
            Axis::Expertise => "Expertise",
            Axis::Subjectivity => "Subjectivity",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s.trim()))
    }

    pub fn language_axis(self) -> LanguageAxis {
        language_axes().into_iter().find(|a| a.axis == self).expect("axis resource covers every axis")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageAxis {
    pub axis: Axis,
    pub direction_low: String,
    pub direction_high: String,
    pub description: String,
}

/// Parses the bundled axis resource.
pub fn language_axes() -> Vec<LanguageAxis> {
    let body: String = AXES_RESOURCE
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    body.split("\n%%\n")
        .filter_map(|block| {
            let (head, desc) = block.trim().split_once('\n')?;
            let mut parts = head.split('|');
            Some(LanguageAxis {
                axis: Axis::parse(parts.next()?)?,
                direction_low: parts.next()?.to_string(),
                direction_high: parts.next()?.to_string(),
                description: desc.trim().to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParaphraseSpec {
    pub axes: Vec<Axis>,
    pub scores: Vec<u8>,
}

impl ParaphraseSpec {
    pub fn new(axes: Vec<Axis>, scores: Vec<u8>) -> Result<Self, PromptError> {
        let spec = ParaphraseSpec { axes, scores };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let (a, s) = (self.axes.len(), self.scores.len());
        if a != s || !(1..=2).contains(&a) {
            return Err(PromptError::AxisCount { axes: a, scores: s });
        }
        if a == 2 && self.axes[0] == self.axes[1] {
            return Err(PromptError::DuplicateAxis(self.axes[0]));
        }
        match self.scores.iter().find(|s| !(1..=5).contains(*s)) {
            Some(&bad) => Err(PromptError::InvalidScore(bad)),
            None => Ok(()),
        }
    }
}

pub fn build_paraphrase_prompt(
    sentence: &str,
    spec: &ParaphraseSpec,
) -> Result<RenderedPrompt, PromptError> {
    spec.validate()?;
    non_empty(sentence, "Example Sentence")?;
    let axes: Vec<LanguageAxis> = spec.axes.iter().map(|a| a.language_axis()).collect();
    let scores: Vec<String> = spec.scores.iter().map(|s| s.to_string()).collect();
    Ok(if axes.len() == 1 {
        render(
            PromptTask::Paraphrase1,
            &[
                ("Axis", &axes[0].description),
                ("Direction-1", &axes[0].direction_low),
                ("Direction-2", &axes[0].direction_high),
                ("Example Sentence", sentence),
                ("Score", &scores[0]),
            ],
        )
    } else {
        render(
            PromptTask::Paraphrase2,
            &[
                ("Axis-1", &axes[0].description),
                ("Axis-2", &axes[1].description),
                ("Direction-1-1", &axes[0].direction_low),
                ("Direction-1-2", &axes[0].direction_high),
                ("Direction-2-1", &axes[1].direction_low),
                ("Direction-2-2", &axes[1].direction_high),
                ("Example Sentence", sentence),
                ("Score-A", &scores[0]),
                ("Score-B", &scores[1]),
            ],
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParaphraseMode {
    OneAxis,
    TwoAxes,
}

/// All variants in axis order, then ascending scores: 20 for one axis,
/// 150 for two.
pub fn enumerate_paraphrase_variants(mode: ParaphraseMode) -> Vec<ParaphraseSpec> {
    let mut out = Vec::new();
    match mode {
        ParaphraseMode::OneAxis => {
            for a in Axis::ALL {
                for s in 1..=5 {
                    out.push(ParaphraseSpec { axes: vec![a], scores: vec![s] });
                }
            }
        }
        ParaphraseMode::TwoAxes => {
            for (i, a) in Axis::ALL.into_iter().enumerate() {
                for b in Axis::ALL.into_iter().skip(i + 1) {
                    for sa in 1..=5 {
                        for sb in 1..=5 {
                            out.push(ParaphraseSpec { axes: vec![a, b], scores: vec![sa, sb] });
                        }
                    }
                }
            }
        }
    }
    out
}
