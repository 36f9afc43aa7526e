#!/usr/bin/env python3
"""Adapter that dies after its first reply; exercises failure handling."""
import json
import sys

line = sys.stdin.readline()
req = json.loads(line)
reply = {"id": req["id"], "scores": {"toxicity": 0.0}}
sys.stdout.write(json.dumps(reply) + "\n")
sys.stdout.flush()
sys.exit(1)
