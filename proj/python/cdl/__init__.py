# Copyright 2026 The cdl Authors
# SPDX-License-Identifier: Apache-2.0
"""Polynomial-activation CNN inference over homomorphically encrypted batches.

Everything here is a thin layer over the C++ core in ``cdl._cdl``. Arrays
are numpy: images are ``uint8[count, rows, cols]``, quantized instances and
integer logits are ``uint64[count, n]`` residues mod p.
"""

from ._cdl import (
    Backend,
    CapacityError,
    CdlError,
    CipherBatch,
    Ciphertext,
    DegenerateBasis,
    KeySet,
    LevelExhausted,
    ModelFile,
    ModelSpec,
    NoiseExhausted,
    Params,
    PublicKey,
    RelinKey,
    SecretKey,
    Server,
    TransportError,
    ValidationError,
    bench,
    capacity_check,
    decrypt_batch,
    depth_report,
    dequantized_trace,
    encrypt_batch,
    fit,
    gen_fixture_model,
    gen_images,
    gen_model1,
    gen_model1_reduced,
    infer_batch,
    infer_plain,
    load_mnist,
    load_model,
    load_model_file,
    model_spec,
    parse_model_file,
    predict,
    public_key_from_bytes,
    recommend_params,
    relin_key_from_bytes,
    run_e2e,
    secret_key_from_bytes,
    send_job,
    to_instances,
    wide_plaintext_prime,
)

__version__ = "0.1.0"


def signed_logits(logits, p):
    """Map residues in [0, p) to the balanced range (-p/2, p/2]."""
    import numpy as np

    x = np.asarray(logits, dtype=np.uint64).astype(object)
    return np.where(x > p // 2, x - p, x).astype(np.int64)


def classify(spec, images):
    """Plaintext-mode argmax for a uint8 image stack."""
    logits = infer_plain(spec, to_instances(images, spec))
    return [predict(row, spec.p) for row in logits]
