//! Closed-form simulators and responses written as expressions.
//!
//! Variables are `x1..xd` and `theta1..thetaq` (plain `x` and `theta` are
//! accepted when the dimension is 1), plus the constant `pi`. The usual
//! elementary functions are available both bare (`sin(x)`) and with the
//! `math::` prefix. Integer literals divide as integers, so write `1.0/3.0`.

use evalexpr::{
    build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    tree: Node<DefaultNumericTypes>,
    names: Vec<String>,
    x_dim: usize,
    theta_dim: usize,
}

impl Expression {
    /// Parses `source` over `x_dim` control and `theta_dim` calibration variables.
    pub fn parse(source: &str, x_dim: usize, theta_dim: usize) -> Result<Self> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source).map_err(|e| Error::Expression {
            expression: source.to_string(),
            message: e.to_string(),
        })?;
        let mut names: Vec<String> = (1..=x_dim).map(|i| format!("x{i}")).collect();
        names.extend((1..=theta_dim).map(|i| format!("theta{i}")));
        if x_dim == 1 {
            names.push("x".into());
        }
        if theta_dim == 1 {
            names.push("theta".into());
        }
        names.push("pi".into());
        if let Some(unknown) = tree.iter_variable_identifiers().find(|v| !names.iter().any(|n| n == v)) {
            return Err(Error::Expression {
                expression: source.to_string(),
                message: format!("unknown variable `{unknown}`"),
            });
        }
        Ok(Self { source: source.to_string(), tree, names, x_dim, theta_dim })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        if x.len() != self.x_dim || theta.len() != self.theta_dim {
            return Err(Error::input(format!(
                "expression `{}` expects {} control and {} calibration inputs",
                self.source, self.x_dim, self.theta_dim
            )));
        }
        let mut values: Vec<Value> = x.iter().chain(theta).map(|v| Value::Float(*v)).collect();
        if self.x_dim == 1 {
            values.push(Value::Float(x[0]));
        }
        if self.theta_dim == 1 {
            values.push(Value::Float(theta[0]));
        }
        values.push(Value::Float(std::f64::consts::PI));
        let ctx = Bindings { names: &self.names, values };
        self.tree.eval_number_with_context(&ctx).map_err(|e| Error::Expression {
            expression: self.source.clone(),
            message: e.to_string(),
        })
    }
}

struct Bindings<'a> {
    names: &'a [String],
    values: Vec<Value>,
}

impl Context for Bindings<'_> {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value> {
        self.names.iter().position(|n| n == identifier).map(|i| &self.values[i])
    }

    fn call_function(&self, identifier: &str, argument: &Value) -> EvalexprResult<Value> {
        let unary: fn(f64) -> f64 = match identifier {
            "sin" => f64::sin,
            "cos" => f64::cos,
            "tan" => f64::tan,
            "exp" => f64::exp,
            "ln" => f64::ln,
            "sqrt" => f64::sqrt,
            "abs" => f64::abs,
            "sinh" => f64::sinh,
            "cosh" => f64::cosh,
            "tanh" => f64::tanh,
            "atan" => f64::atan,
            _ => return Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string())),
        };
        Ok(Value::Float(unary(argument.as_number()?)))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _disabled: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        Err(EvalexprError::ContextNotMutable)
    }
}
