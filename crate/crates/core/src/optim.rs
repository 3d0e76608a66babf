//! Adam (generator and discriminator) and look-ahead Nesterov momentum
//! (teacher). Each optimizer owns its state; the states for the three
//! networks never share tensors.

use crate::error::{Error, Result};
use crate::graph::GradMap;
use crate::param::ParamSet;
use crate::tensor::Tensor;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub hp: AdamParams,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

fn check_keys(params: &ParamSet, grads: &GradMap) -> Result<()> {
    for p in params.iter() {
        if p.trainable && !grads.contains_key(&p.name) {
            return Err(Error::InvalidArg(format!("missing gradient for parameter {:?}", p.name)));
        }
    }
    for k in grads.keys() {
        match params.get(k) {
            Some(p) if p.trainable => {}
            _ => return Err(Error::InvalidArg(format!("gradient for unknown parameter {k:?}"))),
        }
    }
    Ok(())
}

impl Adam {
    pub fn new(hp: AdamParams) -> Self {
        Adam { hp, t: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    /// m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2; bias-corrected;
    /// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
    pub fn step(&mut self, params: &mut ParamSet, grads: &GradMap) -> Result<()> {
        check_keys(params, grads)?;
        self.t += 1;
        let bc1 = 1.0 - self.hp.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.hp.beta2.powi(self.t as i32);
        for p in params.iter_mut() {
            if !p.trainable {
                continue;
            }
            let g = &grads[&p.name];
            let m = self.m.entry(p.name.clone()).or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
            let v = self.v.entry(p.name.clone()).or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
            if !m.same_shape(g) || !v.same_shape(g) {
                return Err(Error::shape("adam_step", format!("state/gradient mismatch for {:?}", p.name)));
            }
            for ((th, gv), (mv, vv)) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *mv = self.hp.beta1 * *mv + (1.0 - self.hp.beta1) * gv;
                *vv = self.hp.beta2 * *vv + (1.0 - self.hp.beta2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *th -= self.hp.lr * m_hat / (v_hat.sqrt() + self.hp.eps);
            }
        }
        Ok(())
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &BTreeMap<String, Tensor> {
        &self.m
    }

    pub fn second_moments(&self) -> &BTreeMap<String, Tensor> {
        &self.v
    }

    pub fn restore(&mut self, t: u64, m: BTreeMap<String, Tensor>, v: BTreeMap<String, Tensor>) {
        self.t = t;
        self.m = m;
        self.v = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumParams {
    pub lr: f64,
    pub mu: f64,
}

/// Nesterov momentum in look-ahead form: the gradient is evaluated at
/// theta + mu*v, then v <- mu*v - lr*grad and theta <- theta + v.
#[derive(Debug, Clone)]
pub struct NesterovMomentum {
    pub hp: MomentumParams,
    vel: BTreeMap<String, Tensor>,
}

impl NesterovMomentum {
    pub fn new(hp: MomentumParams) -> Self {
        NesterovMomentum { hp, vel: BTreeMap::new() }
    }

    pub fn step<F>(&mut self, params: &mut ParamSet, grad_fn: F) -> Result<()>
    where
        F: FnOnce(&ParamSet) -> Result<GradMap>,
    {
        let mut look = params.clone();
        for p in look.iter_mut() {
            if !p.trainable {
                continue;
            }
            if let Some(v) = self.vel.get(&p.name) {
                for (pv, &vv) in p.value.data_mut().iter_mut().zip(v.data()) {
                    *pv += self.hp.mu * vv;
                }
            }
        }
        let grads = grad_fn(&look)?;
        check_keys(params, &grads)?;
        for p in params.iter_mut() {
            if !p.trainable {
                continue;
            }
            let g = &grads[&p.name];
            let v = self.vel.entry(p.name.clone()).or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
            if !v.same_shape(g) {
                return Err(Error::shape("nesterov_step", format!("state/gradient mismatch for {:?}", p.name)));
            }
            for ((th, gv), vv) in p.value.data_mut().iter_mut().zip(g.data()).zip(v.data_mut().iter_mut()) {
                *vv = self.hp.mu * *vv - self.hp.lr * gv;
                *th += *vv;
            }
        }
        Ok(())
    }

    pub fn velocities(&self) -> &BTreeMap<String, Tensor> {
        &self.vel
    }

    pub fn restore(&mut self, vel: BTreeMap<String, Tensor>) {
        self.vel = vel;
    }
}
