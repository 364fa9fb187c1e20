//! Description pairs through an LLM client, and template instructions.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DescriptionPair, EditParams, EditQuery, EditType, ImageRecord};
use crate::util::contains_phrase;

pub const MAX_WORDS: usize = 60;
/// Regenerations allowed after the first attempt.
pub const N_RETRY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    BaseCaption,
    AttributeRewrite,
    TargetRewrite,
    Combine,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::BaseCaption => "base_caption",
            Stage::AttributeRewrite => "attribute_rewrite",
            Stage::TargetRewrite => "target_rewrite",
            Stage::Combine => "combine",
        }
    }

    fn parse(s: &str) -> Option<Stage> {
        [
            Stage::BaseCaption,
            Stage::AttributeRewrite,
            Stage::TargetRewrite,
            Stage::Combine,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }
}

/// Text with `{slot}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub edit_type: Option<EditType>,
    pub stage: Option<Stage>,
    pub text: String,
}

pub type Slots = BTreeMap<String, String>;

impl PromptTemplate {
    pub fn slots(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find('{') {
            let Some(len) = rest[start..].find('}') else { break };
            let name = &rest[start + 1..start + len];
            if !out.iter().any(|s| s == name) {
                out.push(name.to_string());
            }
            rest = &rest[start + len + 1..];
        }
        out
    }

    /// Fills every slot; a slot without a value is an error naming it.
    pub fn render(&self, slots: &Slots) -> Result<String> {
        let mut text = self.text.clone();
        for name in self.slots() {
            let value = slots.get(&name).ok_or_else(|| Error::MissingSlot {
                template: self.template_id.clone(),
                slot: name.clone(),
            })?;
            text = text.replace(&format!("{{{name}}}"), value);
        }
        Ok(text.trim().to_string())
    }
}

macro_rules! builtin {
    ($($dir:literal / $name:literal),* $(,)?) => {
        &[$(($dir, $name, include_str!(concat!("../data/", $dir, "/", $name, ".txt")))),*]
    };
}

const BUILTIN_TEMPLATES: &[(&str, &str, &str)] = builtin![
    "prompts" / "base_caption",
    "prompts" / "attribute_rewrite",
    "prompts" / "target_rewrite.addition",
    "prompts" / "target_rewrite.replacement",
    "prompts" / "target_rewrite.resizing",
    "prompts" / "target_rewrite.background_change",
    "prompts" / "combine.replacement",
    "prompts" / "combine.style_change",
    "instructions" / "addition",
    "instructions" / "removal",
    "instructions" / "replacement",
    "instructions" / "attribute_change",
    "instructions" / "resizing",
    "instructions" / "background_change",
    "instructions" / "style_change",
];

/// Caption prompts keyed by id (`stage` or `stage.edit_type`) and one
/// instruction template per edit type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub prompts: BTreeMap<String, PromptTemplate>,
    pub instructions: BTreeMap<EditType, PromptTemplate>,
}

fn prompt_from(id: &str, text: &str) -> Result<PromptTemplate> {
    let (stage, edit_type) = match id.split_once('.') {
        Some((s, t)) => (s, Some(t)),
        None => (id, None),
    };
    let stage = Stage::parse(stage).ok_or_else(|| Error::Unknown {
        kind: "prompt stage",
        name: stage.to_string(),
    })?;
    let edit_type = match edit_type {
        Some(t) => Some(EditType::parse(t).ok_or_else(|| Error::Unknown {
            kind: "edit type",
            name: t.to_string(),
        })?),
        None => None,
    };
    Ok(PromptTemplate {
        template_id: id.to_string(),
        edit_type,
        stage: Some(stage),
        text: text.to_string(),
    })
}

fn instruction_from(name: &str, text: &str) -> Result<(EditType, PromptTemplate)> {
    let t = EditType::parse(name).ok_or_else(|| Error::Unknown {
        kind: "edit type",
        name: name.to_string(),
    })?;
    Ok((
        t,
        PromptTemplate {
            template_id: format!("instruction.{name}"),
            edit_type: Some(t),
            stage: None,
            text: text.to_string(),
        },
    ))
}

impl TemplateSet {
    pub fn builtin() -> TemplateSet {
        let mut set = TemplateSet {
            prompts: BTreeMap::new(),
            instructions: BTreeMap::new(),
        };
        for (dir, name, text) in BUILTIN_TEMPLATES {
            set.insert(dir, name, text).expect("shipped templates are well formed");
        }
        set
    }

    fn insert(&mut self, dir: &str, name: &str, text: &str) -> Result<()> {
        match dir {
            "prompts" => {
                self.prompts.insert(name.to_string(), prompt_from(name, text)?);
            }
            _ => {
                let (t, tpl) = instruction_from(name, text)?;
                self.instructions.insert(t, tpl);
            }
        }
        Ok(())
    }

    /// Built-in templates overridden by `<dir>/prompts/*.txt` and
    /// `<dir>/instructions/*.txt`, where present.
    pub fn with_overrides(dir: &Path) -> Result<TemplateSet> {
        let mut set = TemplateSet::builtin();
        for sub in ["prompts", "instructions"] {
            let d = dir.join(sub);
            if !d.is_dir() {
                continue;
            }
            let mut files: Vec<_> = std::fs::read_dir(&d)
                .map_err(|e| Error::io(&d, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            for f in files {
                let text = std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
                let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                set.insert(sub, stem, &text)?;
            }
        }
        Ok(set)
    }

    pub fn prompt(&self, id: &str) -> Result<&PromptTemplate> {
        self.prompts
            .get(id)
            .ok_or_else(|| Error::MissingTemplate(id.to_string()))
    }
}

/// `a` becomes `an` before a vowel-initial word.
pub fn fix_articles(text: &str) -> String {
    let words: Vec<&str> = text.split(' ').collect();
    let mut out = Vec::with_capacity(words.len());
    for (i, w) in words.iter().enumerate() {
        let next_vowel = words
            .get(i + 1)
            .and_then(|n| n.chars().next())
            .is_some_and(|c| "aeiouAEIOU".contains(c));
        match *w {
            "a" if next_vowel => out.push("an"),
            "A" if next_vowel => out.push("An"),
            "an" if !next_vowel && i + 1 < words.len() => out.push("a"),
            "An" if !next_vowel && i + 1 < words.len() => out.push("A"),
            _ => out.push(w),
        }
    }
    out.join(" ")
}

/// Slot values for a query's instruction template.
pub fn instruction_slots(query: &EditQuery) -> Slots {
    let mut s = Slots::new();
    if let Some(c) = &query.object_class {
        s.insert("object".into(), c.clone());
    }
    match &query.params {
        EditParams::Addition {
            target_class,
            relation,
        } => {
            s.insert("target".into(), target_class.clone());
            s.insert("relation".into(), relation.phrase().into());
        }
        EditParams::Removal => {}
        EditParams::Replacement { target_class } => {
            s.insert("target".into(), target_class.clone());
        }
        EditParams::AttributeChange { category, from, to } => {
            s.insert("category".into(), category.as_str().into());
            s.insert("from".into(), from.clone());
            s.insert("to".into(), to.clone());
        }
        EditParams::Resizing { direction } => {
            s.insert("direction".into(), direction.as_str().into());
        }
        EditParams::BackgroundChange { background } => {
            s.insert("background".into(), background.clone());
        }
        EditParams::StyleChange { style } => {
            s.insert("style".into(), style.clone());
        }
    }
    s
}

pub fn instantiate_instruction(query: &EditQuery, templates: &TemplateSet) -> Result<String> {
    let tpl = templates
        .instructions
        .get(&query.edit_type())
        .ok_or_else(|| Error::MissingTemplate(format!("instruction.{}", query.edit_type())))?;
    Ok(fix_articles(&tpl.render(&instruction_slots(query))?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaptionVerdict {
    pub missing: Vec<String>,
    pub word_count: usize,
    pub max_words: usize,
}

impl CaptionVerdict {
    pub fn passed(&self) -> bool {
        self.missing.is_empty() && self.word_count <= self.max_words
    }

    pub fn reasons(&self) -> Vec<String> {
        let mut r: Vec<String> = self
            .missing
            .iter()
            .map(|t| format!("missing `{t}`"))
            .collect();
        if self.word_count > self.max_words {
            r.push(format!("{} words, limit {}", self.word_count, self.max_words));
        }
        r
    }
}

/// Whole-word, case-insensitive presence of every token plus a word limit.
pub fn validate_caption(text: &str, required: &[String], max_words: usize) -> CaptionVerdict {
    CaptionVerdict {
        missing: required
            .iter()
            .filter(|t| !contains_phrase(text, t))
            .cloned()
            .collect(),
        word_count: text.split_whitespace().count(),
        max_words,
    }
}

pub struct LlmRequest<'a> {
    pub template_id: &'a str,
    pub prompt: String,
    pub slots: &'a Slots,
}

/// Stateless text completion.
pub trait LlmClient: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &LlmRequest<'_>) -> Result<String>;
}

/// Replays canned responses in order, then fails.
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    responses: Mutex<VecDeque<String>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedLlm {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedLlm {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// Prompts received so far.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log").clone()
    }
}

impl LlmClient for ScriptedLlm {
    fn id(&self) -> String {
        "scripted-llm".into()
    }

    fn complete(&self, request: &LlmRequest<'_>) -> Result<String> {
        self.prompts
            .lock()
            .expect("prompt log")
            .push(request.prompt.clone());
        self.responses
            .lock()
            .expect("script")
            .pop_front()
            .ok_or_else(|| Error::backend("scripted-llm", "script exhausted"))
    }
}

/// Case-insensitive whole-word replacement of the first `phrase`.
pub fn replace_phrase(text: &str, phrase: &str, replacement: &str) -> Option<String> {
    let lower = text.to_lowercase();
    let target = phrase.to_lowercase();
    if lower.len() != text.len() || target.is_empty() {
        return None;
    }
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric());
    let mut from = 0;
    while let Some(pos) = lower[from..].find(&target) {
        let start = from + pos;
        let end = start + target.len();
        if !is_word(lower[..start].chars().last()) && !is_word(lower[end..].chars().next()) {
            return Some(format!("{}{}{}", &text[..start], replacement, &text[end..]));
        }
        from = start + 1;
    }
    None
}

fn sentence_body(caption: &str) -> &str {
    caption.trim().trim_end_matches('.')
}

fn lower_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Offline stand-in that performs each stage by string rules on the slots.
#[derive(Debug, Clone, Default)]
pub struct TemplateLlm;

impl TemplateLlm {
    fn slot<'a>(slots: &'a Slots, name: &str) -> Result<&'a str> {
        slots.get(name).map(String::as_str).ok_or_else(|| Error::MissingSlot {
            template: "template-llm".into(),
            slot: name.into(),
        })
    }
}

impl LlmClient for TemplateLlm {
    fn id(&self) -> String {
        "template-llm".into()
    }

    fn complete(&self, request: &LlmRequest<'_>) -> Result<String> {
        let s = request.slots;
        let caption = || Self::slot(s, "caption");
        let out = match request.template_id {
            "base_caption" => {
                let objects: Vec<String> = Self::slot(s, "objects")?
                    .split(", ")
                    .map(|o| format!("a {o}"))
                    .collect();
                let listed = match objects.as_slice() {
                    [] => "nothing".to_string(),
                    [one] => one.clone(),
                    [init @ .., last] => format!("{} and {last}", init.join(", ")),
                };
                format!("A photo of {listed}.")
            }
            "attribute_rewrite" => {
                let mut text = caption()?.to_string();
                for item in Self::slot(s, "attributes")?.split("; ") {
                    if let Some((class, words)) = item.split_once(": ") {
                        let phrase = format!("{} {class}", words.replace(", ", " "));
                        text = replace_phrase(&text, class, &phrase).unwrap_or(text);
                    }
                }
                text
            }
            "target_rewrite.replacement" => {
                let text = caption()?;
                replace_phrase(text, Self::slot(s, "object")?, Self::slot(s, "target")?)
                    .unwrap_or_else(|| text.to_string())
            }
            "combine.replacement" => caption()?.to_string(),
            "target_rewrite.addition" => format!(
                "{}. A {} is {} the {}.",
                sentence_body(caption()?),
                Self::slot(s, "target")?,
                Self::slot(s, "relation")?,
                Self::slot(s, "object")?
            ),
            "target_rewrite.resizing" => format!(
                "{}. The {} is {} than it was.",
                sentence_body(caption()?),
                Self::slot(s, "object")?,
                Self::slot(s, "direction")?
            ),
            "target_rewrite.background_change" => format!(
                "{}. The background is a {}.",
                sentence_body(caption()?),
                Self::slot(s, "background")?
            ),
            "combine.style_change" => format!(
                "A {} art of {}.",
                Self::slot(s, "style")?,
                lower_first(sentence_body(Self::slot(s, "scene")?))
            ),
            other => {
                return Err(Error::backend(
                    "template-llm",
                    format!("no rule for template {other}"),
                ))
            }
        };
        Ok(fix_articles(&out))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub adapter: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: usize,
    /// Responses file (one per line) for the scripted adapter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            adapter: "template-llm".into(),
            model: "offline".into(),
            temperature: 0.0,
            max_tokens: 128,
            script: None,
        }
    }
}

impl LlmConfig {
    pub fn build(&self, base: &Path) -> Result<Arc<dyn LlmClient>> {
        match self.adapter.as_str() {
            "template-llm" => Ok(Arc::new(TemplateLlm)),
            "scripted-llm" => {
                let path = base.join(self.script.as_deref().ok_or_else(|| {
                    Error::invalid("scripted-llm needs a `script` file")
                })?);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Ok(Arc::new(ScriptedLlm::new(text.lines().map(str::to_string))))
            }
            other => Err(Error::Unknown {
                kind: "llm adapter",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutput {
    pub text: String,
    /// Regenerations beyond the first attempt.
    pub retries: usize,
    pub passed: bool,
}

/// Calls the LLM until the output validates, at most `1 + N_RETRY` times.
/// Client errors count as failed attempts.
pub fn run_stage(
    llm: &dyn LlmClient,
    template: &PromptTemplate,
    slots: &Slots,
    required: &[String],
) -> Result<StageOutput> {
    let mut slots = slots.clone();
    slots
        .entry("max_words".into())
        .or_insert_with(|| MAX_WORDS.to_string());
    let prompt = template.render(&slots)?;
    let mut last = String::new();
    for attempt in 0..=N_RETRY {
        let request = LlmRequest {
            template_id: &template.template_id,
            prompt: prompt.clone(),
            slots: &slots,
        };
        match llm.complete(&request) {
            Ok(text) => {
                let text = text.trim().to_string();
                if validate_caption(&text, required, MAX_WORDS).passed() {
                    return Ok(StageOutput {
                        text,
                        retries: attempt,
                        passed: true,
                    });
                }
                last = text;
            }
            Err(e) => log::warn!("{}: attempt {attempt} failed: {e}", template.template_id),
        }
    }
    Ok(StageOutput {
        text: last,
        retries: N_RETRY,
        passed: false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptionOutcome {
    pub pair: DescriptionPair,
    pub retries: usize,
    pub needs_manual_fix: bool,
}

/// `C0` for an image: base caption naming every editable object, then the
/// annotated attributes of those objects inserted.
pub fn base_caption(
    image: &ImageRecord,
    llm: &dyn LlmClient,
    templates: &TemplateSet,
) -> Result<StageOutput> {
    let editable: Vec<_> = image.editable_objects().collect();
    let names: Vec<String> = editable.iter().map(|o| o.class_name.clone()).collect();
    let slots: Slots = [("objects".to_string(), names.join(", "))].into();
    let base = run_stage(llm, templates.prompt("base_caption")?, &slots, &names)?;
    let described: Vec<String> = editable
        .iter()
        .filter(|o| !o.attributes.is_empty())
        .map(|o| {
            let words: Vec<&str> = o.attributes.values().map(String::as_str).collect();
            format!("{}: {}", o.class_name, words.join(", "))
        })
        .collect();
    if !base.passed || described.is_empty() {
        return Ok(base);
    }
    let mut required = names.clone();
    for o in &editable {
        required.extend(o.attributes.values().cloned());
    }
    let slots: Slots = [
        ("caption".to_string(), base.text.clone()),
        ("attributes".to_string(), described.join("; ")),
    ]
    .into();
    let rewritten = run_stage(llm, templates.prompt("attribute_rewrite")?, &slots, &required)?;
    Ok(StageOutput {
        retries: base.retries + rewritten.retries,
        ..rewritten
    })
}

/// `Ce` for a query given an accepted `C0`.
pub fn target_caption(
    query: &EditQuery,
    c0: &str,
    llm: &dyn LlmClient,
    templates: &TemplateSet,
) -> Result<StageOutput> {
    let mut slots = instruction_slots(query);
    slots.insert("caption".into(), c0.to_string());
    let local = |text: String, required: &[String]| StageOutput {
        passed: validate_caption(&text, required, MAX_WORDS).passed(),
        text,
        retries: 0,
    };
    match &query.params {
        EditParams::Removal => Err(Error::invalid(format!(
            "query {}: removal has no description pair",
            query.query_id
        ))),
        EditParams::AttributeChange { from, to, .. } => {
            let text = replace_phrase(c0, from, to).unwrap_or_else(|| c0.to_string());
            Ok(local(text, std::slice::from_ref(to)))
        }
        EditParams::StyleChange { style } => {
            let prefixed = fix_articles(&format!(
                "A {style} art. The art contains following: {c0}"
            ));
            slots.insert("caption".into(), prefixed);
            slots.insert("scene".into(), c0.to_string());
            run_stage(llm, templates.prompt("combine.style_change")?, &slots, std::slice::from_ref(style))
        }
        EditParams::Replacement { target_class } => {
            let required = vec![target_class.clone()];
            let swapped = run_stage(
                llm,
                templates.prompt("target_rewrite.replacement")?,
                &slots,
                &required,
            )?;
            if !swapped.passed {
                return Ok(swapped);
            }
            slots.insert("caption".into(), swapped.text.clone());
            let fixed = run_stage(llm, templates.prompt("combine.replacement")?, &slots, &required)?;
            Ok(StageOutput {
                retries: swapped.retries + fixed.retries,
                ..fixed
            })
        }
        EditParams::Addition { target_class, .. } => run_stage(
            llm,
            templates.prompt("target_rewrite.addition")?,
            &slots,
            std::slice::from_ref(target_class),
        ),
        EditParams::Resizing { .. } => {
            let object = query.object_class.clone().unwrap_or_default();
            run_stage(llm, templates.prompt("target_rewrite.resizing")?, &slots, &[object])
        }
        EditParams::BackgroundChange { background } => run_stage(
            llm,
            templates.prompt("target_rewrite.background_change")?,
            &slots,
            std::slice::from_ref(background),
        ),
    }
}

/// Both captions of a query; flags it when any stage never validated.
pub fn generate_description_pair(
    query: &EditQuery,
    image: &ImageRecord,
    llm: &dyn LlmClient,
    templates: &TemplateSet,
) -> Result<DescriptionOutcome> {
    if query.instruction_only() {
        return Err(Error::invalid(format!(
            "query {}: removal is instruction-only",
            query.query_id
        )));
    }
    let c0 = base_caption(image, llm, templates)?;
    describe_with_base(query, &c0, llm, templates)
}

/// Like [`generate_description_pair`] with a precomputed `C0`, so an image's
/// base caption can be shared by all its queries.
pub fn describe_with_base(
    query: &EditQuery,
    c0: &StageOutput,
    llm: &dyn LlmClient,
    templates: &TemplateSet,
) -> Result<DescriptionOutcome> {
    let ce = target_caption(query, &c0.text, llm, templates)?;
    Ok(DescriptionOutcome {
        pair: DescriptionPair {
            original: c0.text.clone(),
            edited: ce.text,
        },
        retries: c0.retries + ce.retries,
        needs_manual_fix: !(c0.passed && ce.passed),
    })
}
