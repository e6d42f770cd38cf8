#!/usr/bin/env python3
"""Masked-LM scoring bridge.

Speaks line-delimited JSON on stdin/stdout; see the `external` backend
for the protocol. Requires `transformers` and `torch`, plus a local or
downloadable checkpoint (set HF_HOME to control the cache location).

Usage:
    python3 scripts/mlm_bridge.py --model bert-base-uncased
"""

import argparse
import json
import sys


def log(msg):
    print(msg, file=sys.stderr, flush=True)


class Bridge:
    def __init__(self, model_name):
        import torch
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        self.torch = torch
        self.model_name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForMaskedLM.from_pretrained(model_name)
        self.model.eval()
        # deterministic, untrained readout for sequence scoring: the
        # first-token (classification) representation through a fixed
        # seeded linear head
        torch.manual_seed(0)
        hidden = self.model.config.hidden_size
        self.seq_head = torch.nn.Linear(hidden, 1)

    def mask_scores(self, text, candidates):
        torch = self.torch
        tok = self.tokenizer
        prepared = text.replace("[MASK]", tok.mask_token)
        ids = tok(prepared, return_tensors="pt")
        mask_positions = (ids["input_ids"][0] == tok.mask_token_id).nonzero()
        if len(mask_positions) != 1:
            raise ValueError(f"expected exactly one mask token, found {len(mask_positions)}")
        pos = mask_positions[0, 0].item()
        with torch.inference_mode():
            logits = self.model(**ids).logits[0, pos]
            logprobs = torch.log_softmax(logits, dim=-1)
        scores = {}
        for cand in candidates:
            cand_id = tok.convert_tokens_to_ids(cand)
            if cand_id is None or cand_id == tok.unk_token_id:
                raise ValueError(f"candidate {cand!r} is not a single vocabulary token")
            scores[cand] = logprobs[cand_id].item()
        return scores

    def sequence_score(self, text):
        torch = self.torch
        ids = self.tokenizer(text, return_tensors="pt")
        with torch.inference_mode():
            out = self.model(**ids, output_hidden_states=True)
            cls = out.hidden_states[-1][0, 0]
            return self.seq_head(cls).item()

    def vocab_check(self, tokens):
        result = {}
        for t in tokens:
            pieces = self.tokenizer.tokenize(t)
            result[t] = len(pieces) == 1 and pieces[0] != self.tokenizer.unk_token
        return result


def serve(bridge):
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            op = req.get("op")
            if op == "ping":
                resp = {"ok": True, "model": bridge.model_name}
            elif op == "mask_scores":
                resp = {"ok": True, "scores": bridge.mask_scores(req["text"], req["candidates"])}
            elif op == "sequence_score":
                resp = {"ok": True, "score": bridge.sequence_score(req["text"])}
            elif op == "vocab_check":
                resp = {"ok": True, "single_token": bridge.vocab_check(req["tokens"])}
            else:
                resp = {"ok": False, "error": f"unknown op {op!r}"}
        except Exception as exc:  # report, keep serving
            resp = {"ok": False, "error": str(exc)}
        print(json.dumps(resp), flush=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", default="bert-base-uncased")
    args = parser.parse_args()
    log(f"loading {args.model} ...")
    bridge = Bridge(args.model)
    log("ready")
    serve(bridge)


if __name__ == "__main__":
    main()
