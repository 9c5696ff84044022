use serde::{Deserialize, Serialize};

use super::{FnSpaceError, FunctionExpr};

/// Serialisable description of a [`FunctionExpr`]:
/// `{"kind": "...", "params": [...], "children": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub children: Vec<FunctionSpec>,
}

fn bad(kind: &str, reason: &str) -> FnSpaceError {
    FnSpaceError::BadParams { kind: kind.to_string(), reason: reason.to_string() }
}

impl FunctionSpec {
    pub fn to_expr(&self) -> Result<FunctionExpr, FnSpaceError> {
        let k = self.kind.as_str();
        let p = &self.params;
        let need = |n: usize| if p.len() == n { Ok(()) } else { Err(bad(k, &format!("expected {n} params, got {}", p.len()))) };
        if p.iter().any(|v| !v.is_finite()) {
            return Err(bad(k, "params must be finite"));
        }
        match k {
            "poly" => {
                if p.is_empty() {
                    return Err(bad(k, "need at least one coefficient"));
                }
                Ok(FunctionExpr::Poly(p.clone()))
            }
            "monomial" => {
                need(1)?;
                if p[0] < 0.0 || p[0].fract() != 0.0 {
                    return Err(bad(k, "degree must be a nonnegative integer"));
                }
                Ok(FunctionExpr::monomial(p[0] as usize))
            }
            "exp" => {
                need(1)?;
                Ok(FunctionExpr::exp(p[0]))
            }
            "abspow" | "truncpow" => {
                need(2)?;
                if p[1] < 0.0 {
                    return Err(bad(k, "exponent must be nonnegative"));
                }
                Ok(if k == "abspow" { FunctionExpr::abs_pow(p[0], p[1]) } else { FunctionExpr::trunc_pow(p[0], p[1]) })
            }
            "scale" => {
                need(1)?;
                if self.children.len() != 1 {
                    return Err(bad(k, "expected exactly one child"));
                }
                Ok(FunctionExpr::Scale(p[0], Box::new(self.children[0].to_expr()?)))
            }
            "sum" => {
                if self.children.is_empty() {
                    return Err(bad(k, "expected at least one child"));
                }
                let terms = self.children.iter().map(|c| c.to_expr()).collect::<Result<_, _>>()?;
                Ok(FunctionExpr::Sum(terms))
            }
            other => Err(FnSpaceError::UnknownKind(other.to_string())),
        }
    }
}

/// Parses a function given inline (`kind:p1,p2,...`, terms joined by `+`),
/// as JSON, or as a path to a JSON file.
pub fn parse_function(s: &str) -> Result<FunctionExpr, FnSpaceError> {
    let t = s.trim();
    if t.starts_with('{') {
        let spec: FunctionSpec = serde_json::from_str(t).map_err(|e| FnSpaceError::Parse(e.to_string()))?;
        return spec.to_expr();
    }
    let path = std::path::Path::new(t);
    if t.ends_with(".json") || (path.is_file() && !t.contains(':')) {
        let text = std::fs::read_to_string(path).map_err(|e| FnSpaceError::Parse(format!("{t}: {e}")))?;
        return parse_function(&text);
    }
    let terms: Vec<&str> = t.split('+').map(str::trim).collect();
    let mut exprs = Vec::with_capacity(terms.len());
    for term in terms {
        let (kind, rest) = term.split_once(':').unwrap_or((term, ""));
        let params = rest
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse::<f64>().map_err(|_| FnSpaceError::Parse(format!("bad number '{x}' in '{term}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = FunctionSpec { kind: kind.trim().to_ascii_lowercase(), params, children: Vec::new() };
        exprs.push(spec.to_expr()?);
    }
    Ok(if exprs.len() == 1 { exprs.pop().unwrap() } else { FunctionExpr::Sum(exprs) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_and_json_forms() {
        assert_eq!(parse_function("poly:0,0,1").unwrap(), FunctionExpr::poly(&[0.0, 0.0, 1.0]));
        assert_eq!(parse_function("exp:1").unwrap(), FunctionExpr::exp(1.0));
        let j = r#"{"kind":"sum","children":[{"kind":"monomial","params":[4]},{"kind":"scale","params":[-1],"children":[{"kind":"monomial","params":[2]}]}]}"#;
        let f = parse_function(j).unwrap();
        assert!((f.eval(0.5) - (0.0625 - 0.25)).abs() < 1e-15);
        let g = parse_function("monomial:4 + poly:0,0,-1").unwrap();
        assert!((g.eval(0.5) - f.eval(0.5)).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(parse_function("sinc:1"), Err(FnSpaceError::UnknownKind(_))));
        assert!(parse_function("abspow:0").is_err());
        assert!(parse_function("exp:x").is_err());
        assert!(parse_function(r#"{"kind":"scale","params":[2]}"#).is_err());
    }
}
