use indexmap::IndexMap;

use super::*;
use crate::minilang::parse_program;
use crate::plans::parse_plan_doc;
use crate::pos::Cursor;

struct P<'a> {
    cur: Cursor<'a>,
}

/// Language tag, code and position of a fenced block.
type Fence = (String, String, Pos);
type R<T> = Result<T, SpecError>;

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl<'a> P<'a> {
    fn ws(&mut self) {
        loop {
            self.cur.eat_while(char::is_whitespace);
            if self.cur.rest().starts_with("//") {
                self.cur.eat_while(|c| c != '\n');
            } else {
                break;
            }
        }
    }

    fn pos(&self) -> Pos {
        self.cur.pos()
    }

    fn describe_next(&mut self) -> String {
        match self.cur.peek() {
            None => "end of input".into(),
            Some(c) if is_ident_char(c) => {
                let w: String = self.cur.rest().chars().take_while(|c| is_ident_char(*c)).collect();
                format!("`{w}`")
            }
            Some(c) => format!("`{c}`"),
        }
    }

    fn err<T>(&mut self, expected: &[&str]) -> R<T> {
        self.ws();
        Err(SpecError::Parse {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.describe_next(),
        })
    }

    fn peek_ident(&mut self) -> Option<String> {
        self.ws();
        match self.cur.peek() {
            Some(c) if is_ident_start(c) => {
                Some(self.cur.rest().chars().take_while(|c| is_ident_char(*c)).collect())
            }
            _ => None,
        }
    }

    fn ident(&mut self, what: &str) -> R<String> {
        self.ws();
        match self.cur.peek() {
            Some(c) if is_ident_start(c) => Ok(self.cur.eat_while(is_ident_char)),
            _ => self.err(&[what]),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if self.peek_ident().as_deref() == Some(kw) {
            self.cur.eat_while(is_ident_char);
            true
        } else {
            false
        }
    }

    fn peek_char(&mut self) -> Option<char> {
        self.ws();
        self.cur.peek()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek_char() == Some(c) {
            self.cur.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> R<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(&[&format!("`{c}`")])
        }
    }

    fn string(&mut self) -> R<String> {
        if self.peek_char() != Some('"') {
            return self.err(&["string"]);
        }
        let start = self.pos();
        self.cur.bump();
        let mut s = String::new();
        loop {
            match self.cur.bump() {
                Some('"') => return Ok(s),
                Some('\\') => match self.cur.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c) => s.push(c),
                    None => break,
                },
                Some(c) => s.push(c),
                None => break,
            }
        }
        Err(SpecError::Parse {
            pos: start,
            expected: vec!["closing `\"`".into()],
            found: "end of input".into(),
        })
    }

    fn int(&mut self) -> R<i64> {
        self.ws();
        let pos = self.pos();
        let neg = self.cur.peek() == Some('-');
        if neg {
            self.cur.bump();
        }
        let digits = self.cur.eat_while(|c| c.is_ascii_digit());
        let text = if neg { format!("-{digits}") } else { digits };
        text.parse().map_err(|_| SpecError::Parse {
            pos,
            expected: vec!["integer".into()],
            found: if text.is_empty() { "no digits".into() } else { text },
        })
    }

    fn facet(&mut self) -> R<Facet> {
        let name = self.ident("answer facet")?;
        match (name.as_str(), self.peek_char()) {
            ("stdout", Some('"')) => Ok(Facet::Stdout {
                text: self.string()?,
            }),
            ("text", Some('"')) => Ok(Facet::Text {
                text: self.string()?,
            }),
            _ => {
                self.expect('=')?;
                let value = if self.eat('{') {
                    let mut xs = Vec::new();
                    if !self.eat('}') {
                        loop {
                            xs.push(self.int()?);
                            if self.eat('}') {
                                break;
                            }
                            self.expect(',')?;
                        }
                    }
                    Value::IntArray(xs)
                } else {
                    Value::Int(self.int()?)
                };
                Ok(Facet::Binding { name, value })
            }
        }
    }

    /// Question body up to the matching `}`. Braces inside fenced code do not
    /// count. Returns the raw text and the fenced blocks.
    fn question_body(&mut self) -> R<(String, Vec<Fence>)> {
        let open = self.pos();
        let mut raw = String::new();
        let mut fences = Vec::new();
        let mut depth = 1;
        loop {
            if self.cur.rest().starts_with("```") {
                for _ in 0..3 {
                    raw.push(self.cur.bump().unwrap());
                }
                let info = self.cur.eat_while(|c| c != '\n');
                raw.push_str(&info);
                if let Some(nl) = self.cur.bump() {
                    raw.push(nl);
                }
                let origin = self.pos();
                let mut code = String::new();
                loop {
                    let line_start = self.cur.rest();
                    if line_start.is_empty() {
                        return Err(SpecError::Parse {
                            pos: origin,
                            expected: vec!["closing ```".into()],
                            found: "end of input".into(),
                        });
                    }
                    let line_len = line_start.find('\n').map_or(line_start.len(), |i| i + 1);
                    let line = &line_start[..line_len];
                    if line.trim_start().starts_with("```") {
                        let indent = line.len() - line.trim_start().len();
                        for _ in 0..indent + 3 {
                            raw.push(self.cur.bump().unwrap());
                        }
                        break;
                    }
                    for _ in line.chars() {
                        self.cur.bump();
                    }
                    raw.push_str(line);
                    code.push_str(line);
                }
                fences.push((info.trim().to_string(), code, origin));
                continue;
            }
            let Some(c) = self.cur.bump() else {
                return Err(SpecError::Parse {
                    pos: open,
                    expected: vec!["`}` closing the question".into()],
                    found: "end of input".into(),
                });
            };
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok((raw, fences));
                    }
                }
                _ => {}
            }
            raw.push(c);
        }
    }

    fn plan_body(&mut self) -> R<(String, Pos)> {
        let origin = self.pos();
        let mut raw = String::new();
        let mut in_str = false;
        loop {
            let Some(c) = self.cur.bump() else {
                return Err(SpecError::Parse {
                    pos: origin,
                    expected: vec!["`}` closing the plan".into()],
                    found: "end of input".into(),
                });
            };
            match c {
                '"' => in_str = !in_str,
                '\\' if in_str => {
                    raw.push(c);
                    if let Some(n) = self.cur.bump() {
                        raw.push(n);
                    }
                    continue;
                }
                '}' if !in_str => return Ok((raw, origin)),
                _ => {}
            }
            raw.push(c);
        }
    }
}

/// Parses a `.exr` exercise specification.
pub fn parse_spec(source: &str) -> Result<ExerciseSpec, SpecError> {
    let mut p = P {
        cur: Cursor::new(source),
    };
    p.ws();
    let start = p.pos();
    if !p.keyword("exercise") {
        return p.err(&["`exercise`"]);
    }
    let id = p.string()?;
    p.expect('{')?;

    let mut target = None;
    let mut requires = Vec::new();
    let mut provenance = None;
    let mut question = None;
    let mut mcq: Option<(bool, Vec<McqOption>, Pos)> = None;
    let mut answer = Vec::new();
    let mut plan = None;
    let mut spans = Spans {
        exercise: start,
        ..Spans::default()
    };
    let mut seen = Vec::new();

    loop {
        if p.eat('}') {
            break;
        }
        let kw_pos = {
            p.ws();
            p.pos()
        };
        let kw = p.ident("section keyword")?;
        if seen.contains(&kw) {
            return Err(SpecError::Parse {
                pos: kw_pos,
                expected: vec!["each section at most once".into()],
                found: format!("second `{kw}`"),
            });
        }
        match kw.as_str() {
            "target" => {
                p.expect(':')?;
                let pp = p.pos();
                let proc = p.ident("process category")?;
                let proc = proc.parse().map_err(|_| SpecError::Parse {
                    pos: pp,
                    expected: vec!["process category".into()],
                    found: format!("`{proc}`"),
                })?;
                if !p.keyword("x") {
                    return p.err(&["`x`"]);
                }
                p.ws();
                let kp = p.pos();
                let know = p.ident("knowledge category")?;
                let know = know.parse().map_err(|_| SpecError::Parse {
                    pos: kp,
                    expected: vec!["knowledge category".into()],
                    found: format!("`{know}`"),
                })?;
                target = Some(BloomCell::new(proc, know));
            }
            "requires" => {
                p.expect(':')?;
                requires.push(p.ident("concept identifier")?);
                while p.eat(',') {
                    requires.push(p.ident("concept identifier")?);
                }
            }
            "provenance" => {
                p.expect(':')?;
                let template = p.ident("template name")?;
                if !p.keyword("seed") {
                    return p.err(&["`seed`"]);
                }
                let seed = p.int()?;
                let mut bindings = IndexMap::new();
                loop {
                    let save = p.cur.clone();
                    let Some(k) = p.peek_ident() else { break };
                    p.cur.eat_while(is_ident_char);
                    if !p.eat('=') {
                        p.cur = save;
                        break;
                    }
                    let v = p.string()?;
                    bindings.insert(k, v);
                }
                provenance = Some(Provenance {
                    template,
                    seed: seed as u64,
                    bindings,
                });
            }
            "question" => {
                p.expect('{')?;
                spans.question = kw_pos;
                question = Some(p.question_body()?);
            }
            "mcq" => {
                let fill = p.keyword("fill");
                p.expect('{')?;
                let mut opts: Vec<McqOption> = Vec::new();
                while !p.eat('}') {
                    p.ws();
                    let pos = p.pos();
                    let key = p.ident("option key")?;
                    let mut chars = key.chars();
                    let (Some(k), None) = (chars.next(), chars.next()) else {
                        return Err(SpecError::Parse {
                            pos,
                            expected: vec!["single-letter option key".into()],
                            found: format!("`{key}`"),
                        });
                    };
                    if !k.is_ascii_lowercase() {
                        return Err(SpecError::Parse {
                            pos,
                            expected: vec!["option key a..z".into()],
                            found: format!("`{key}`"),
                        });
                    }
                    if opts.iter().any(|o| o.key == k) {
                        return Err(SpecError::DuplicateOptionKey { key: k, pos });
                    }
                    p.expect(':')?;
                    let label = p.string()?;
                    let mut opt = McqOption {
                        key: k,
                        label,
                        expect: None,
                        distractor_tag: None,
                        correct: false,
                        pos,
                    };
                    loop {
                        if p.eat('*') {
                            opt.correct = true;
                        } else if p.keyword("expect") {
                            opt.expect = Some(p.facet()?);
                        } else if p.keyword("tag") {
                            opt.distractor_tag = Some(p.ident("transform name")?);
                        } else {
                            break;
                        }
                    }
                    opts.push(opt);
                }
                spans.mcq = Some(kw_pos);
                mcq = Some((fill, opts, kw_pos));
            }
            "answer" => {
                p.expect(':')?;
                answer.push(p.facet()?);
                while p.eat(',') {
                    answer.push(p.facet()?);
                }
                spans.answer = Some(kw_pos);
            }
            "plan" => {
                p.expect('{')?;
                let (raw, origin) = p.plan_body()?;
                plan = Some(parse_plan_doc(&raw, origin)?);
                spans.plan = Some(kw_pos);
            }
            _ => {
                return Err(SpecError::Parse {
                    pos: kw_pos,
                    expected: ["target", "requires", "provenance", "question", "mcq", "answer", "plan"]
                        .iter()
                        .map(|s| format!("`{s}`"))
                        .collect(),
                    found: format!("`{kw}`"),
                })
            }
        }
        seen.push(kw);
    }
    p.ws();
    if p.cur.peek().is_some() {
        return p.err(&["end of input"]);
    }

    let Some((question, fences)) = question else {
        return Err(SpecError::Parse {
            pos: start,
            expected: vec!["`question` section".into()],
            found: "none".into(),
        });
    };
    let code: Vec<CodeBlock> = fences
        .into_iter()
        .filter(|(info, _, _)| !matches!(info.as_str(), "text" | "plain"))
        .map(|(_, source, origin)| CodeBlock { source, origin })
        .collect();
    let program = if code.is_empty() {
        None
    } else {
        Some(parse_blocks(&code)?)
    };

    let (mode, options) = match mcq {
        None => (AnswerMode::FreeValue, Vec::new()),
        Some((fill, opts, pos)) => {
            let correct: Vec<char> = opts.iter().filter(|o| o.correct).map(|o| o.key).collect();
            match correct.len() {
                0 => return Err(SpecError::MissingCorrectOption { pos }),
                1 => {}
                _ => return Err(SpecError::MultipleCorrectOptions { keys: correct, pos }),
            }
            if fill && !code.iter().any(|b| b.source.contains(FILL_MARKER)) {
                return Err(SpecError::Parse {
                    pos,
                    expected: vec![format!("a `{FILL_MARKER}` marker in the question code")],
                    found: "none".into(),
                });
            }
            (if fill { AnswerMode::McqFill } else { AnswerMode::Mcq }, opts)
        }
    };

    Ok(ExerciseSpec {
        id,
        target: target.unwrap_or(DEFAULT_TARGET),
        target_declared: target.is_some(),
        requires,
        provenance,
        question,
        code,
        program,
        mode,
        options,
        answer,
        plan,
        spans,
    })
}

/// Parses the concatenated blocks, mapping error positions back into the document.
fn parse_blocks(code: &[CodeBlock]) -> Result<Program, SpecError> {
    let joined = code.iter().map(|b| b.source.as_str()).collect::<Vec<_>>().join("\n");
    parse_program(&joined).map_err(|e| {
        let mut line = e.pos().line;
        let mut block = &code[0];
        for b in code {
            let n = b.source.matches('\n').count() as u32 + 1;
            block = b;
            if line <= n {
                break;
            }
            line -= n;
        }
        let local = Pos::new(line, e.pos().col);
        SpecError::Code {
            pos: local.offset_by(block.origin, 0),
            source: e,
        }
    })
}
