//! Remote vision-language client: JSON over HTTP against a
//! chat-completions-style endpoint.
//!
//! Each query sends one prompt (rendered from an editable template) and
//! one base64 PNG. When the goal is an image, observation and goal are
//! composited side by side into that single PNG, observation left, goal
//! right. Replies may be chatty; the parser extracts the first balanced
//! JSON object from the reply text and validates it against the domain
//! types. After `retries` failed attempts the query degrades to a safe
//! fallback (zero hint / previous boxes / both sub-costs) and flags the
//! answer.
//!
//! The parser functions are public and total: no byte string makes them
//! panic or emit an out-of-range value.

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::{DirectionHint, SceneUnderstanding, Sign, SwitchWeight, Vlm, VlmAnswer};
use crate::types::{Box2D, BoxLabel, Frame, Goal};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("transport failure: {0}")]
    Failed(String),
}

/// One round trip to the model endpoint: request body in, reply text out.
pub trait Transport {
    fn send(&mut self, body: &Value) -> Result<String, TransportError>;
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplyError {
    #[error("no JSON object in reply")]
    NoJson,
    #[error("reply JSON malformed: {0}")]
    Malformed(String),
    #[error("missing or invalid field `{0}`")]
    BadField(&'static str),
}

/// Prompt templates for the three queries; `{goal}` is replaced with the
/// instruction text (or a goal-image marker) before sending.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub direction: String,
    pub boxes: String,
    pub switch: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            direction: include_str!("../../prompts/direction.txt").to_string(),
            boxes: include_str!("../../prompts/boxes.txt").to_string(),
            switch: include_str!("../../prompts/switch.txt").to_string(),
        }
    }
}

impl PromptSet {
    /// Loads `direction.txt`, `boxes.txt`, `switch.txt` from a directory.
    pub fn from_dir(dir: impl AsRef<std::path::Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            direction: std::fs::read_to_string(dir.join("direction.txt"))?,
            boxes: std::fs::read_to_string(dir.join("boxes.txt"))?,
            switch: std::fs::read_to_string(dir.join("switch.txt"))?,
        })
    }
}

/// Finds the first balanced `{...}` object in free-form text, respecting
/// string literals and escapes.
pub fn extract_first_json(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_json_object(text: &str) -> Result<Value, ReplyError> {
    let snippet = extract_first_json(text).ok_or(ReplyError::NoJson)?;
    serde_json::from_str(snippet).map_err(|e| ReplyError::Malformed(e.to_string()))
}

fn sign_field(obj: &Value, key: &'static str) -> Result<Sign, ReplyError> {
    let v = obj.get(key).ok_or(ReplyError::BadField(key))?;
    let n = v.as_f64().ok_or(ReplyError::BadField(key))?;
    if !n.is_finite() || n.fract() != 0.0 {
        return Err(ReplyError::BadField(key));
    }
    Sign::from_i64(n as i64).ok_or(ReplyError::BadField(key))
}

/// Parses a direction reply: seven fields `dx..rz` in {-1,0,1} and
/// `g` in {0,1} (numeric or boolean).
pub fn parse_direction_reply(text: &str) -> Result<DirectionHint, ReplyError> {
    let obj = parse_json_object(text)?;
    let g = match obj.get("g") {
        Some(Value::Bool(b)) => *b,
        Some(v) => match v.as_f64() {
            Some(0.0) => false,
            Some(1.0) => true,
            _ => return Err(ReplyError::BadField("g")),
        },
        None => return Err(ReplyError::BadField("g")),
    };
    Ok(DirectionHint {
        dx: sign_field(&obj, "dx")?,
        dy: sign_field(&obj, "dy")?,
        dz: sign_field(&obj, "dz")?,
        rx: sign_field(&obj, "rx")?,
        ry: sign_field(&obj, "ry")?,
        rz: sign_field(&obj, "rz")?,
        g,
    })
}

fn box_field(v: &Value, label: BoxLabel, fw: u32, fh: u32) -> Result<Box2D, ReplyError> {
    #[derive(Deserialize)]
    struct RawBox {
        cx: f64,
        cy: f64,
        w: f64,
        h: f64,
    }
    let raw: RawBox =
        serde_json::from_value(v.clone()).map_err(|_| ReplyError::BadField("box"))?;
    let finite = [raw.cx, raw.cy, raw.w, raw.h].iter().all(|x| x.is_finite());
    if !finite || raw.w <= 0.0 || raw.h <= 0.0 {
        return Err(ReplyError::BadField("box"));
    }
    Ok(Box2D::new(raw.cx, raw.cy, raw.w, raw.h, label).clamped(fw, fh))
}

/// Parses a boxes reply: `end_effector` and `sub_goal` objects (each
/// `{cx, cy, w, h}`), optional `interference` array. Out-of-frame boxes
/// are clamped to the frame bounds.
pub fn parse_boxes_reply(
    text: &str,
    frame_w: u32,
    frame_h: u32,
) -> Result<SceneUnderstanding, ReplyError> {
    let obj = parse_json_object(text)?;
    let e = box_field(
        obj.get("end_effector").ok_or(ReplyError::BadField("end_effector"))?,
        BoxLabel::EndEffector,
        frame_w,
        frame_h,
    )?;
    let s = box_field(
        obj.get("sub_goal").ok_or(ReplyError::BadField("sub_goal"))?,
        BoxLabel::SubGoal,
        frame_w,
        frame_h,
    )?;
    let interference = match obj.get("interference") {
        None | Some(Value::Null) => vec![],
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| box_field(v, BoxLabel::Interference, frame_w, frame_h))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(ReplyError::BadField("interference")),
    };
    Ok(SceneUnderstanding { e, s, interference })
}

/// Parses a switch reply: a JSON object with a `w_D` field, or the bare
/// number itself. Only 0, 0.5 and 1 are admitted.
pub fn parse_switch_reply(text: &str) -> Result<SwitchWeight, ReplyError> {
    let value = match parse_json_object(text) {
        Ok(obj) => obj
            .get("w_D")
            .and_then(Value::as_f64)
            .ok_or(ReplyError::BadField("w_D"))?,
        Err(ReplyError::NoJson) => {
            text.trim().parse::<f64>().map_err(|_| ReplyError::NoJson)?
        }
        Err(e) => return Err(e),
    };
    SwitchWeight::from_value(value).ok_or(ReplyError::BadField("w_D"))
}

/// Pulls the assistant text out of a chat-completions reply body; bodies
/// that are not that shape are treated as the reply text itself.
fn reply_content(body: &str) -> String {
    if let Ok(v) = serde_json::from_str::<Value>(body) {
        if let Some(content) = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
        {
            return content.to_string();
        }
    }
    body.to_string()
}

fn frame_to_png(frame: &Frame) -> Vec<u8> {
    let img = image::RgbImage::from_raw(frame.width, frame.height, frame.pixels.clone())
        .expect("frame buffer length matches dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("png encoding is infallible in memory");
    out.into_inner()
}

/// Observation, and the goal image beside it when one exists.
fn compose_query_image(obs: &Frame, goal: &Goal) -> Frame {
    match goal.image() {
        None => obs.clone(),
        Some(g) => {
            let h = obs.height.max(g.height);
            let w = obs.width + g.width;
            let mut out = Frame::filled(w, h, obs.timestamp, [0, 0, 0]);
            for y in 0..obs.height {
                for x in 0..obs.width {
                    out.set(x, y, obs.get(x, y));
                }
            }
            for y in 0..g.height {
                for x in 0..g.width {
                    out.set(obs.width + x, y, g.get(x, y));
                }
            }
            out
        }
    }
}

/// Builds the chat-completions request body for one query.
pub fn build_request(model: &str, prompt: &str, obs: &Frame, goal: &Goal) -> Value {
    use base64::Engine;
    let png = frame_to_png(&compose_query_image(obs, goal));
    let b64 = base64::engine::general_purpose::STANDARD.encode(png);
    serde_json::json!({
        "model": model,
        "messages": [{
            "role": "user",
            "content": [
                { "type": "text", "text": prompt },
                { "type": "image_url",
                  "image_url": { "url": format!("data:image/png;base64,{b64}") } },
            ],
        }],
    })
}

/// Remote client over any [`Transport`]. Queries hold `&mut self`, so one
/// request is in flight per client at a time.
pub struct RemoteVlm<T: Transport> {
    transport: T,
    prompts: PromptSet,
    model: String,
    retries: u32,
    last_boxes: Option<SceneUnderstanding>,
}

impl<T: Transport> RemoteVlm<T> {
    pub fn new(transport: T, prompts: PromptSet, model: impl Into<String>, retries: u32) -> Self {
        Self {
            transport,
            prompts,
            model: model.into(),
            retries: retries.max(1),
            last_boxes: None,
        }
    }

    fn attempt<R>(
        &mut self,
        template: &str,
        obs: &Frame,
        goal: &Goal,
        parse: impl Fn(&str) -> Result<R, ReplyError>,
    ) -> Option<R> {
        let prompt = template.replace("{goal}", goal.prompt_text());
        let body = build_request(&self.model, &prompt, obs, goal);
        for _ in 0..self.retries {
            let Ok(raw) = self.transport.send(&body) else { continue };
            if let Ok(parsed) = parse(&reply_content(&raw)) {
                return Some(parsed);
            }
        }
        None
    }
}

impl<T: Transport> Vlm for RemoteVlm<T> {
    fn query_direction(&mut self, obs: &Frame, goal: &Goal) -> VlmAnswer<DirectionHint> {
        let template = self.prompts.direction.clone();
        match self.attempt(&template, obs, goal, parse_direction_reply) {
            Some(hint) => VlmAnswer::ok(hint),
            None => VlmAnswer::degraded(DirectionHint::ZERO),
        }
    }

    fn query_boxes(&mut self, obs: &Frame, goal: &Goal) -> VlmAnswer<SceneUnderstanding> {
        let template = self.prompts.boxes.clone();
        let (fw, fh) = (obs.width, obs.height);
        match self.attempt(&template, obs, goal, |text| parse_boxes_reply(text, fw, fh)) {
            Some(boxes) => {
                self.last_boxes = Some(boxes.clone());
                VlmAnswer::ok(boxes)
            }
            None => {
                // Reuse the previous understanding; full-frame boxes when
                // no query has ever succeeded.
                let fallback = self.last_boxes.clone().unwrap_or_else(|| {
                    let full = Box2D::new(
                        fw as f64 / 2.0,
                        fh as f64 / 2.0,
                        fw as f64,
                        fh as f64,
                        BoxLabel::SubGoal,
                    );
                    let mut e = full;
                    e.label = BoxLabel::EndEffector;
                    SceneUnderstanding { e, s: full, interference: vec![] }
                });
                VlmAnswer::degraded(fallback)
            }
        }
    }

    fn query_switch(&mut self, obs: &Frame, goal: &Goal) -> VlmAnswer<SwitchWeight> {
        let template = self.prompts.switch.clone();
        match self.attempt(&template, obs, goal, parse_switch_reply) {
            Some(w) => VlmAnswer::ok(w),
            None => VlmAnswer::degraded(SwitchWeight::Both),
        }
    }
}

/// Blocking HTTP transport. Reads `VLM_ENDPOINT` (required), `VLM_API_KEY`
/// and `VLM_MODEL` from the environment.
#[cfg(feature = "remote-http")]
pub mod http {
    use super::{Transport, TransportError};
    use serde_json::Value;

    pub struct HttpTransport {
        endpoint: String,
        token: Option<String>,
        agent: ureq::Agent,
    }

    impl HttpTransport {
        pub fn new(endpoint: impl Into<String>, token: Option<String>) -> Self {
            Self { endpoint: endpoint.into(), token, agent: ureq::Agent::new_with_defaults() }
        }

        pub fn from_env() -> Result<Self, TransportError> {
            let endpoint = std::env::var("VLM_ENDPOINT")
                .map_err(|_| TransportError::Failed("VLM_ENDPOINT not set".into()))?;
            Ok(Self::new(endpoint, std::env::var("VLM_API_KEY").ok()))
        }
    }

    impl Transport for HttpTransport {
        fn send(&mut self, body: &Value) -> Result<String, TransportError> {
            let mut req = self.agent.post(&self.endpoint).header("content-type", "application/json");
            if let Some(token) = &self.token {
                req = req.header("authorization", &format!("Bearer {token}"));
            }
            let reply = req
                .send_json(body)
                .map_err(|e| TransportError::Failed(e.to_string()))?
                .body_mut()
                .read_to_string()
                .map_err(|e| TransportError::Failed(e.to_string()))?;
            Ok(reply)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct MockTransport {
        replies: Vec<Result<String, TransportError>>,
        calls: usize,
    }

    impl MockTransport {
        fn with(replies: Vec<Result<String, TransportError>>) -> Self {
            Self { replies, calls: 0 }
        }
    }

    impl Transport for MockTransport {
        fn send(&mut self, _body: &Value) -> Result<String, TransportError> {
            let i = self.calls.min(self.replies.len().saturating_sub(1));
            self.calls += 1;
            match &self.replies[i] {
                Ok(s) => Ok(s.clone()),
                Err(TransportError::Failed(m)) => Err(TransportError::Failed(m.clone())),
            }
        }
    }

    fn obs() -> Frame {
        Frame::filled(16, 16, 0, [10, 10, 10])
    }

    fn goal() -> Goal {
        Goal::Instruction { instruction: "press the button".into() }
    }

    fn client(replies: Vec<Result<String, TransportError>>) -> RemoteVlm<MockTransport> {
        RemoteVlm::new(MockTransport::with(replies), PromptSet::default(), "test-model", 3)
    }

    #[test]
    fn direction_parses_from_chatty_reply() {
        let content = "Sure! Based on the scene: {\"dx\": 1, \"dy\": -1, \"dz\": 0, \"rx\": 0, \"ry\": 0, \"rz\": 0, \"g\": 0} good luck";
        let body = serde_json::json!({
            "choices": [{"message": {"content": content}}]
        })
        .to_string();
        let mut c = client(vec![Ok(body)]);
        let ans = c.query_direction(&obs(), &goal());
        assert!(!ans.degraded);
        assert_eq!(ans.value.dx, Sign::Pos);
        assert_eq!(ans.value.dy, Sign::Neg);
        assert!(!ans.value.g);
    }

    #[test]
    fn direction_missing_fields_degrades_to_zero() {
        let mut c = client(vec![Ok("{\"dx\": 1}".into())]);
        let ans = c.query_direction(&obs(), &goal());
        assert!(ans.degraded);
        assert_eq!(ans.value, DirectionHint::ZERO);
    }

    #[test]
    fn direction_out_of_range_sign_rejected() {
        assert_eq!(
            parse_direction_reply("{\"dx\":2,\"dy\":0,\"dz\":0,\"rx\":0,\"ry\":0,\"rz\":0,\"g\":0}"),
            Err(ReplyError::BadField("dx"))
        );
    }

    #[test]
    fn boxes_clamped_to_frame() {
        let text = r#"{"end_effector": {"cx": 8, "cy": 8, "w": 4, "h": 4},
                       "sub_goal": {"cx": 30, "cy": 8, "w": 10, "h": 4},
                       "interference": []}"#;
        let boxes = parse_boxes_reply(text, 16, 16).unwrap();
        assert!(boxes.valid_for(16, 16));
        assert!(boxes.s.cx < 16.0);
    }

    #[test]
    fn boxes_fallback_reuses_previous() {
        let good = r#"{"end_effector": {"cx": 4, "cy": 4, "w": 2, "h": 2},
                       "sub_goal": {"cx": 10, "cy": 10, "w": 3, "h": 3}}"#;
        let mut c = client(vec![
            Ok(good.into()),
            Err(TransportError::Failed("down".into())),
            Err(TransportError::Failed("down".into())),
            Err(TransportError::Failed("down".into())),
        ]);
        let first = c.query_boxes(&obs(), &goal());
        assert!(!first.degraded);
        let second = c.query_boxes(&obs(), &goal());
        assert!(second.degraded);
        assert_eq!(second.value, first.value);
    }

    #[test]
    fn switch_accepts_bare_number() {
        assert_eq!(parse_switch_reply("0.5"), Ok(SwitchWeight::Both));
        assert_eq!(parse_switch_reply(" 1 "), Ok(SwitchWeight::PixelOnly));
        assert_eq!(parse_switch_reply("{\"w_D\": 0}"), Ok(SwitchWeight::VlmOnly));
    }

    #[test]
    fn switch_rejects_out_of_set_values() {
        assert!(parse_switch_reply("0.3").is_err());
        let mut c = client(vec![Ok("0.3".into())]);
        let ans = c.query_switch(&obs(), &goal());
        assert!(ans.degraded);
        assert_eq!(ans.value, SwitchWeight::Both);
    }

    #[test]
    fn extract_json_handles_strings_and_nesting() {
        let text = r#"prefix {"a": "brace } in string", "b": {"c": 1}} suffix {"d": 2}"#;
        let got = extract_first_json(text).unwrap();
        assert_eq!(got, r#"{"a": "brace } in string", "b": {"c": 1}}"#);
        assert_eq!(extract_first_json("no json here"), None);
        assert_eq!(extract_first_json("{unclosed"), None);
    }

    #[test]
    fn request_carries_prompt_and_image() {
        let body = build_request("m", "find {goal}", &obs(), &goal());
        let text = body.pointer("/messages/0/content/0/text").unwrap().as_str().unwrap();
        assert!(text.contains("find"));
        let url = body.pointer("/messages/0/content/1/image_url/url").unwrap().as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
    }

    #[test]
    fn goal_image_composited_beside_observation() {
        let g = Goal::Image { image: Frame::filled(16, 16, 0, [200, 0, 0]) };
        let composed = compose_query_image(&obs(), &g);
        assert_eq!(composed.width, 32);
        assert_eq!(composed.get(0, 0), [10, 10, 10]);
        assert_eq!(composed.get(16, 0), [200, 0, 0]);
    }

    #[test]
    fn parser_never_panics_on_garbage() {
        for garbage in ["", "{", "}{", "{\"dx\":", "\u{0}\u{1}\u{2}", "{\"w_D\": 1e309}", "NaN"] {
            let _ = parse_direction_reply(garbage);
            let _ = parse_boxes_reply(garbage, 16, 16);
            let _ = parse_switch_reply(garbage);
        }
    }
}
