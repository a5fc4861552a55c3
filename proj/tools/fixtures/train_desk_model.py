#!/usr/bin/env python3
"""Builds tests/fixtures/desk_model.dskw.

Runs the same toolchain a user would: generate the family corpus, cluster a
10% sample with the CLI, export a balanced dataset, train the classifier, then
the GreedyHash stage, and write DSKW weights. Deterministic for a fixed seed
on CPU with one thread.
"""

import argparse
import json
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

BLOCK = 4096


def run(cli, *args):
    out = subprocess.run([str(cli), *map(str, args)], check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1]) if out.stdout.strip() else {}


def read_dsds(path):
    raw = Path(path).read_bytes()
    magic, version, count, classes = raw[:4], *struct.unpack_from("<III", raw, 4)
    assert magic == b"DSDS" and version == 1
    rec = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, 4 + BLOCK)
    labels = rec[:, :4].copy().view("<u4").reshape(-1).astype(np.int64)
    return rec[:, 4:].copy(), labels, classes


def to_input(blocks):
    x = torch.from_numpy(blocks.astype(np.float32))
    return (x / 255.0 * 2.0 - 1.0).unsqueeze(1)


class Features(nn.Module):
    def __init__(self):
        super().__init__()
        chans = [1, 16, 32, 64]
        self.convs = nn.ModuleList(nn.Conv1d(chans[i], chans[i + 1], 8, padding="same") for i in range(3))
        self.bns = nn.ModuleList(nn.BatchNorm1d(c, eps=1e-5) for c in chans[1:])
        self.dense = nn.Linear(64 * 64, 1024)
        self.drop = nn.Dropout(0.1)

    def forward(self, x):
        for conv, bn in zip(self.convs, self.bns):
            x = F.max_pool1d(F.relu(bn(conv(x))), 4)
        return self.drop(F.relu(self.dense(x.flatten(1))))


class Classifier(nn.Module):
    def __init__(self, classes):
        super().__init__()
        self.features = Features()
        self.out = nn.Linear(1024, classes)

    def forward(self, x):
        return self.out(self.features(x))


class SignSTE(torch.autograd.Function):
    @staticmethod
    def forward(ctx, h):
        return torch.where(h >= 0, torch.ones_like(h), -torch.ones_like(h))

    @staticmethod
    def backward(ctx, g):
        return g


class HashNet(nn.Module):
    def __init__(self, features, classes, bits=128):
        super().__init__()
        self.features = features
        self.hash = nn.Linear(1024, bits)
        self.head = nn.Linear(bits, classes)

    def forward(self, x):
        h = self.hash(self.features(x))
        b = SignSTE.apply(h)
        return self.head(b), h, b


def accuracy(model, x, y, hashed=False):
    model.eval()
    hits = 0
    with torch.no_grad():
        for i in range(0, len(x), 256):
            out = model(x[i:i + 256])
            logits = out[0] if hashed else out
            hits += (logits.argmax(1) == y[i:i + 256]).sum().item()
    return hits / max(1, len(x))


def train(model, x, y, epochs, lr, batch, loss_fn, seed):
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    gen = torch.Generator().manual_seed(seed)
    for epoch in range(epochs):
        model.train()
        perm = torch.randperm(len(x), generator=gen)
        total = 0.0
        for i in range(0, len(x), batch):
            idx = perm[i:i + batch]
            opt.zero_grad()
            loss = loss_fn(model(x[idx]), y[idx])
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        print(f"  epoch {epoch + 1}/{epochs} loss {total / len(x):.4f}", flush=True)


def export_dskw(net, classes, path):
    f = net.features
    tensors = []
    for i in range(3):
        conv, bn = f.convs[i], f.bns[i]
        tensors += [(f"conv{i + 1}.weight", conv.weight), (f"conv{i + 1}.bias", conv.bias),
                    (f"bn{i + 1}.gamma", bn.weight), (f"bn{i + 1}.beta", bn.bias),
                    (f"bn{i + 1}.mean", bn.running_mean), (f"bn{i + 1}.var", bn.running_var)]
    tensors += [("dense.weight", f.dense.weight), ("dense.bias", f.dense.bias),
                ("hash.weight", net.hash.weight), ("hash.bias", net.hash.bias),
                ("head.weight", net.head.weight), ("head.bias", net.head.bias)]
    with open(path, "wb") as out:
        out.write(b"DSKW" + struct.pack("<IIII", 1, classes, 128, len(tensors)))
        for name, t in tensors:
            arr = t.detach().cpu().numpy().astype("<f4")
            out.write(struct.pack("<B", len(name)) + name.encode() + struct.pack("<B", arr.ndim))
            out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            out.write(arr.tobytes(order="C"))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True, help="path to the dsketch executable")
    ap.add_argument("--workdir", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--families", type=int, default=64)
    ap.add_argument("--per-family", type=int, default=32)
    ap.add_argument("--dup-rate", type=float, default=0.1)
    ap.add_argument("--perturb-bytes", type=int, default=64)
    ap.add_argument("--corpus-seed", type=int, default=2024)
    ap.add_argument("--sample-fraction", type=float, default=0.10)
    ap.add_argument("--nblk", type=int, default=64)
    ap.add_argument("--train-frac", type=float, default=0.5)
    ap.add_argument("--cls-epochs", type=int, default=10)
    ap.add_argument("--cls-lr", type=float, default=0.001)
    ap.add_argument("--hash-epochs", type=int, default=10)
    ap.add_argument("--hash-lr", type=float, default=0.002)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--seed", type=int, default=7)
    a = ap.parse_args()

    torch.manual_seed(a.seed)
    torch.set_num_threads(1)
    work = Path(a.workdir)
    work.mkdir(parents=True, exist_ok=True)

    corpus = work / "family.bin"
    print(run(a.cli, "corpus", "gen", "--families", a.families, "--per-family", a.per_family,
              "--dup-rate", a.dup_rate, "--perturb-bytes", a.perturb_bytes, "--seed", a.corpus_seed,
              "--out", corpus))
    blocks = np.frombuffer(corpus.read_bytes(), dtype=np.uint8).reshape(-1, BLOCK)
    rng = np.random.default_rng(a.seed)
    pick = np.sort(rng.choice(len(blocks), size=max(1, round(a.sample_fraction * len(blocks))), replace=False))
    sample = work / "sample.bin"
    sample.write_bytes(blocks[pick].tobytes())

    clusters = work / "clusters.csv"
    print(run(a.cli, "cluster", "--corpus", sample, "--out", clusters))
    train_path = work / "train.dsds"
    print(run(a.cli, "dataset", "build", "--corpus", sample, "--clusters", clusters, "--nblk", a.nblk,
              "--train-frac", a.train_frac, "--seed", a.seed, "--out", train_path))

    xtr, ytr, classes = read_dsds(train_path)
    xte, yte, _ = read_dsds(str(train_path) + ".heldout")
    xtr, xte = to_input(xtr), to_input(xte)
    ytr, yte = torch.from_numpy(ytr), torch.from_numpy(yte)

    print(f"classifier: {classes} classes, {len(xtr)} train / {len(xte)} held-out records")
    cls = Classifier(classes)
    train(cls, xtr, ytr, a.cls_epochs, a.cls_lr, a.batch, F.cross_entropy, a.seed)
    cls_acc = accuracy(cls, xte, yte)
    print(f"classifier held-out top-1 {cls_acc:.4f}")

    net = HashNet(cls.features, classes)

    def hash_loss(out, y):
        logits, h, b = out
        return F.cross_entropy(logits, y) + a.eta * (h - b.detach()).abs().pow(3).mean()

    train(net, xtr, ytr, a.hash_epochs, a.hash_lr, a.batch, hash_loss, a.seed + 1)
    hash_acc = accuracy(net, xte, yte, hashed=True)
    print(f"hash model held-out top-1 {hash_acc:.4f}")

    net.eval()
    export_dskw(net, classes, a.out)
    summary = {"classes": classes, "classifier_top1": cls_acc, "hash_top1": hash_acc, "out": str(a.out)}
    (work / "train_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
