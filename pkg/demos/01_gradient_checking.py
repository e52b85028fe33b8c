#!/usr/bin/env python3
"""Walk through the autodiff engine: build each layer and each training
objective, then verify every analytic gradient against central finite
differences. This is the same machinery the test suite runs; here it
prints a small table so you can see the error magnitudes."""

import numpy as np

import duch.autodiff as ad
from duch.autodiff import Param, finite_difference_check
from duch.losses import (BatchCodes, LossWeights, adversarial_discriminator_loss,
                         adversarial_generator_loss, bit_balance_loss,
                         inter_modal_contrastive, intra_modal_contrastive,
                         quantization_loss, total_loss)
from duch.models import DiscriminatorNet
from duch.trainer import update_binary_codes

rng = np.random.default_rng(0)
rows = []

# --- layers ----------------------------------------------------------------
# probe each layer through a quadratic + linear reduction so even layers
# that normalize their output moments expose an input gradient

def probe(t, coeffs):
    return ad.sum_all(ad.mul(t, t)) + ad.sum_all(ad.mul(t, coeffs))

x = Param(rng.normal(size=(4, 3)))
w = Param(rng.normal(size=(3, 2)))
b = Param(rng.normal(size=(1, 2)))
c = rng.normal(size=(4, 2))
rows.append(("linear", finite_difference_check(
    lambda: probe(ad.linear_forward(x, w, b), c), [x, w, b])))

act = Param(rng.normal(size=(5, 4)) + 0.2)
c = rng.normal(size=(5, 4))
for name, fn in (("relu", ad.relu), ("tanh", ad.tanh), ("sigmoid", ad.sigmoid)):
    rows.append((name, finite_difference_check(lambda: probe(fn(act), c), [act])))

bn = ad.BatchNorm(4)
xb = Param(rng.normal(size=(6, 4)))
c = rng.normal(size=(6, 4))
rows.append(("batchnorm", finite_difference_check(
    lambda: probe(bn.forward(xb, train=True), c), [xb, bn.gamma, bn.beta])))

xn = Param(rng.normal(size=(4, 5)))
c = rng.normal(size=(4, 5))
rows.append(("row_l2_normalize", finite_difference_check(
    lambda: probe(ad.row_l2_normalize(xn), c), [xn])))

# --- losses ----------------------------------------------------------------
codes = BatchCodes(hi=Param(rng.normal(size=(4, 8))),
                   hi_aug=Param(rng.normal(size=(4, 8))),
                   ht=Param(rng.normal(size=(4, 8))),
                   ht_aug=Param(rng.normal(size=(4, 8))))
update_binary_codes(codes)
streams = list(codes.streams())
disc = DiscriminatorNet(8, 6, rng)

rows.append(("inter_modal_contrastive", finite_difference_check(
    lambda: inter_modal_contrastive(codes.hi * 1.0, codes.ht * 1.0, 0.5), streams)))
rows.append(("intra_modal_contrastive", finite_difference_check(
    lambda: intra_modal_contrastive(codes.hi * 1.0, codes.hi_aug * 1.0, 0.5), streams)))
rows.append(("quantization", finite_difference_check(
    lambda: quantization_loss(codes), streams)))
rows.append(("bit_balance", finite_difference_check(
    lambda: bit_balance_loss(codes), streams)))
rows.append(("adversarial (generator)", finite_difference_check(
    lambda: adversarial_generator_loss(disc, ad.vstack([codes.hi, codes.hi_aug])),
    streams + disc.params())))
rows.append(("adversarial (discriminator)", finite_difference_check(
    lambda: adversarial_discriminator_loss(disc, codes), disc.params())))
rows.append(("total objective", finite_difference_check(
    lambda: total_loss(codes, disc, LossWeights(), "generator"),
    streams + disc.params())))

print(f"{'component':<28} {'max rel. error':>14}")
for name, err in rows:
    print(f"{name:<28} {err:>14.3e}")
print("\nall components under 1e-4:", all(e < 1e-4 for _, e in rows))
