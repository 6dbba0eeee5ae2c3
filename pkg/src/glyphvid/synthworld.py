"""Procedural generator of identity-labeled glyph videos.

Every operation is a pure function of its seed and arguments. Identity-relevant
factors (shape, fill hue, marking offset, dot pattern) are decoupled from
scene factors (trajectory, expression, pose, background, scale) by
construction. Corpora include deliberate negative fixtures (no-subject,
count-inconsistent, identity-swap) so downstream filters have labeled pass and
fail cases.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import glyphs
from .errors import ConfigError, SceneVisibilityError
from .tensorio import read_frames_f32, read_tensor, write_frames_u8, write_tensor

SUBJECT_TERMS = ["glyph", "sprite", "walker", "figure", "token"]
ACTION_WORDS = {"static": "resting", "linear": "gliding", "bounce": "bouncing", "circle": "circling"}

# Identity code bookkeeping: identities come in families of 4 that share
# (shape, hue, marking offset) and differ only in dot pattern. Families are a
# seed-scrambled bijection over the (shape x hue x offset) space, so distinct
# identity ids always render distinctly.
FAMILY_SIZE = 4
_GROUP_SPACE = glyphs.N_SHAPES * glyphs.N_HUES * glyphs.N_MARK_OFFSETS
_GROUP_MULT = 1021  # coprime with _GROUP_SPACE
MAX_IDENTITIES = _GROUP_SPACE * glyphs.N_DOT_PATTERNS


@dataclass(frozen=True)
class IdentitySpec:
    """Ground-truth identity factorization of one glyph subject."""

    identity_id: int
    shape_code: int
    palette: tuple  # (fill_rgb, marking_rgb, outline_rgb), each a 3-tuple in [0,1]
    marking_seed: int  # index into the dot-pattern table

    # derived discrete codes, recorded for convenience
    fill_hue: int = 0
    mark_offset: int = 0

    def to_dict(self) -> dict:
        return {
            "identity_id": self.identity_id,
            "shape_code": self.shape_code,
            "palette": [list(c) for c in self.palette],
            "marking_seed": self.marking_seed,
            "fill_hue": self.fill_hue,
            "mark_offset": self.mark_offset,
        }

    @staticmethod
    def from_dict(d: dict) -> "IdentitySpec":
        return IdentitySpec(
            identity_id=d["identity_id"],
            shape_code=d["shape_code"],
            palette=tuple(tuple(c) for c in d["palette"]),
            marking_seed=d["marking_seed"],
            fill_hue=d["fill_hue"],
            mark_offset=d["mark_offset"],
        )


def sample_identity(rng_seed: int, identity_id: int) -> IdentitySpec:
    """Deterministically derive an identity from (seed, id)."""
    if not 0 <= identity_id < MAX_IDENTITIES:
        raise ConfigError(f"identity_id {identity_id} outside [0, {MAX_IDENTITIES})")
    salt = np.random.SeedSequence([int(rng_seed), 0x1D07]).generate_state(2)
    group_offset = int(salt[0]) % _GROUP_SPACE
    dot_rot = int(salt[1]) % glyphs.N_DOT_PATTERNS

    family = (identity_id // FAMILY_SIZE) % _GROUP_SPACE
    dot_slot = identity_id % FAMILY_SIZE + FAMILY_SIZE * ((identity_id // FAMILY_SIZE) // _GROUP_SPACE)
    scrambled = (family * _GROUP_MULT + group_offset) % _GROUP_SPACE
    shape = scrambled % glyphs.N_SHAPES
    hue = (scrambled // glyphs.N_SHAPES) % glyphs.N_HUES
    offset = scrambled // (glyphs.N_SHAPES * glyphs.N_HUES)
    dot_idx = (dot_slot + 7 * scrambled + dot_rot) % glyphs.N_DOT_PATTERNS

    fill = tuple(float(v) for v in glyphs.FILL_RGB[hue])
    mark = tuple(float(v) for v in glyphs.MARK_RGB[glyphs.mark_hue_index(hue, offset)])
    outline = tuple(float(v) for v in glyphs.OUTLINE_COLOR)
    return IdentitySpec(
        identity_id=identity_id,
        shape_code=shape,
        palette=(fill, mark, outline),
        marking_seed=dot_idx,
        fill_hue=hue,
        mark_offset=offset,
    )


@dataclass(frozen=True)
class SceneSpec:
    """Identity-irrelevant scene parameters for one clip.

    trajectory holds one path per subject (unit frame coordinates); the
    expression and pose curves are shared by all subjects in the scene.
    """

    trajectory: tuple  # tuple of per-subject path dicts
    expression_curve: dict
    pose_curve: dict
    background_code: int
    subject_scale: float
    n_subjects: int

    def center_at(self, slot: int, frame: int, n_frames: int) -> tuple[float, float]:
        u = frame / max(n_frames - 1, 1)
        path = self.trajectory[slot]
        kind = path["kind"]
        if kind == "static":
            return path["cx"], path["cy"]
        if kind == "linear":
            return (
                path["x0"] + (path["x1"] - path["x0"]) * u,
                path["y0"] + (path["y1"] - path["y0"]) * u,
            )
        if kind == "bounce":
            return path["cx"], path["cy"] + path["amp"] * math.sin(2.0 * math.pi * path["cycles"] * u)
        if kind == "circle":
            ang = 2.0 * math.pi * path["turns"] * u + path["phase"]
            return path["cx"] + path["orbit"] * math.cos(ang), path["cy"] + path["orbit"] * math.sin(ang)
        raise ConfigError(f"unknown trajectory kind {kind!r}")

    def expression_at(self, frame: int, n_frames: int) -> float:
        u = frame / max(n_frames - 1, 1)
        curve = self.expression_curve
        kind = curve["kind"]
        if kind == "constant":
            return float(curve["v"])
        if kind == "ramp":
            return float(curve["v0"] + (curve["v1"] - curve["v0"]) * u)
        if kind == "sine":
            mid = 0.5 * (curve["lo"] + curve["hi"])
            amp = 0.5 * (curve["hi"] - curve["lo"])
            return float(mid + amp * math.sin(2.0 * math.pi * curve["cycles"] * u))
        raise ConfigError(f"unknown expression curve kind {kind!r}")

    def pose_at(self, frame: int, n_frames: int) -> float:
        curve = self.pose_curve
        kind = curve["kind"]
        if kind == "constant":
            return float(curve["deg"])
        if kind == "spin":
            return float(curve["deg0"] + curve["rate"] * frame)
        raise ConfigError(f"unknown pose curve kind {kind!r}")

    def to_dict(self) -> dict:
        return {
            "trajectory": list(self.trajectory),
            "expression_curve": self.expression_curve,
            "pose_curve": self.pose_curve,
            "background_code": self.background_code,
            "subject_scale": self.subject_scale,
            "n_subjects": self.n_subjects,
        }

    @staticmethod
    def from_dict(d: dict) -> "SceneSpec":
        return SceneSpec(
            trajectory=tuple(d["trajectory"]),
            expression_curve=d["expression_curve"],
            pose_curve=d["pose_curve"],
            background_code=d["background_code"],
            subject_scale=d["subject_scale"],
            n_subjects=d["n_subjects"],
        )


@dataclass
class RenderedClip:
    frames: np.ndarray  # (N, H, W, 3) float32 in [0, 1]
    face_boxes: list  # per frame: list of (subject_index, (x0, y0, x1, y1))
    alpha_masks: np.ndarray  # (N, S, H, W) uint8
    caption: str
    identity_ids: list

    scene: SceneSpec | None = None
    negative_kind: str = "none"
    crossing: bool = False
    fps: int = 8


def _box_from_mask(mask: np.ndarray):
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        return None
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def build_caption(
    identities: list[IdentitySpec],
    scene: SceneSpec,
    rng: np.random.Generator,
    color_word_prob: float = 0.9,
) -> str:
    bg = glyphs.BACKGROUND_WORDS[scene.background_code]
    if scene.n_subjects == 0 or not identities:
        return f"an empty {bg} backdrop"
    phrases = []
    for slot, ident in enumerate(identities[: scene.n_subjects]):
        term = SUBJECT_TERMS[int(rng.integers(len(SUBJECT_TERMS)))]
        action = ACTION_WORDS[scene.trajectory[slot]["kind"]]
        if rng.random() < color_word_prob:
            color = glyphs.hue_to_color_word(ident.fill_hue)
            phrases.append(f"a {color} {term} {action}")
        else:
            phrases.append(f"a {term} {action}")
    return " and ".join(phrases) + f" over a {bg} backdrop"


def parse_caption(caption: str) -> dict:
    """Recover commanded attributes from a grammar caption.

    Returns {"subjects": [(color_word_or_None, term, action)], "background": word}.
    Raises ConfigError on captions outside the grammar.
    """
    words = caption.strip().split()
    if len(words) >= 4 and words[-1] == "backdrop" and words[-3] == "a" and words[-4] == "over":
        bg = words[-2]
        head = words[:-4]
    else:
        raise ConfigError(f"caption does not end in an 'over a <bg> backdrop' clause: {caption!r}")
    if bg not in glyphs.BACKGROUND_WORDS:
        raise ConfigError(f"unknown background word {bg!r}")
    if head[:2] == ["an", "empty"] and len(head) == 2:
        return {"subjects": [], "background": bg}
    subjects = []
    phrase: list[str] = []
    for w in head + ["and"]:
        if w == "and":
            if not (3 <= len(phrase) <= 4) or phrase[0] != "a":
                raise ConfigError(f"unparseable subject phrase {' '.join(phrase)!r}")
            color = phrase[1] if len(phrase) == 4 else None
            term, action = phrase[-2], phrase[-1]
            if color is not None and color not in glyphs.COLOR_WORDS:
                raise ConfigError(f"unknown color word {color!r}")
            if term not in SUBJECT_TERMS or action not in ACTION_WORDS.values():
                raise ConfigError(f"unknown term/action in {' '.join(phrase)!r}")
            subjects.append((color, term, action))
            phrase = []
        else:
            phrase.append(w)
    return {"subjects": subjects, "background": bg}


def render_clip(
    identity_specs: list[IdentitySpec],
    scene: SceneSpec,
    n_frames: int,
    h: int,
    w: int,
    *,
    visibility: list | None = None,
    identity_schedule: np.ndarray | None = None,
    allow_partial_visibility: bool = False,
    caption: str | None = None,
    caption_rng: np.random.Generator | None = None,
    fps: int = 8,
) -> RenderedClip:
    """Render a clip with exact ground-truth boxes and per-subject masks.

    visibility: optional per-subject boolean arrays of length n_frames
    (fixture machinery for count-inconsistent negatives). identity_schedule:
    optional (n_frames,) indices into identity_specs for subject slot 0
    (identity-swap fixtures). Rendering is pure: same inputs, same pixels.
    """
    if n_frames < 1:
        raise ConfigError("n_frames must be >= 1")
    n_sub = scene.n_subjects
    if n_sub > 0 and len(scene.trajectory) < n_sub:
        raise ConfigError("scene must provide one trajectory per subject")

    bg = glyphs.background_template(scene.background_code, h, w)
    frames = np.empty((n_frames, h, w, 3), dtype=np.float32)
    masks = np.zeros((n_frames, max(n_sub, 1), h, w), dtype=np.uint8)
    boxes: list = []
    radius_px = scene.subject_scale * h / 2.0
    ext = radius_px * glyphs.max_extent() + 1.5

    visible_count = np.zeros(max(n_sub, 1), dtype=int)
    fully_inside_count = np.zeros(max(n_sub, 1), dtype=int)
    scheduled_count = np.zeros(max(n_sub, 1), dtype=int)

    for f in range(n_frames):
        canvas = bg.copy()
        frame_boxes = []
        expr = scene.expression_at(f, n_frames)
        pose = math.radians(scene.pose_at(f, n_frames))
        for slot in range(n_sub):
            if visibility is not None and not visibility[slot][f]:
                continue
            scheduled_count[slot] += 1
            ident = identity_specs[slot]
            if slot == 0 and identity_schedule is not None:
                ident = identity_specs[int(identity_schedule[f])]
            cx_u, cy_u = scene.center_at(slot, f, n_frames)
            cx, cy = cx_u * w, cy_u * h
            x0 = max(int(math.floor(cx - ext)), 0)
            x1 = min(int(math.ceil(cx + ext)), w)
            y0 = max(int(math.floor(cy - ext)), 0)
            y1 = min(int(math.ceil(cy + ext)), h)
            if x1 <= x0 or y1 <= y0:
                continue
            rgb, alpha = glyphs.render_glyph_patch(
                ident.shape_code,
                np.asarray(ident.palette[0], dtype=np.float32),
                np.asarray(ident.palette[1], dtype=np.float32),
                glyphs.DOT_PATTERNS[ident.marking_seed],
                radius_px,
                pose,
                expr,
                y1 - y0,
                x1 - x0,
                (cx - x0, cy - y0),
            )
            a3 = alpha[:, :, None]
            canvas[y0:y1, x0:x1] = canvas[y0:y1, x0:x1] * (1.0 - a3) + rgb * a3
            binmask = (alpha >= 0.5).astype(np.uint8)
            masks[f, slot, y0:y1, x0:x1] = np.maximum(masks[f, slot, y0:y1, x0:x1], binmask)
            box = _box_from_mask(masks[f, slot])
            if box is not None:
                frame_boxes.append((slot, box))
                visible_count[slot] += 1
                touches_edge = box[0] == 0 or box[1] == 0 or box[2] == w or box[3] == h
                if not touches_edge:
                    fully_inside_count[slot] += 1
        frame_boxes.sort(key=lambda item: (item[1][0] + item[1][2], item[0]))
        boxes.append(frame_boxes)
        frames[f] = np.clip(canvas, 0.0, 1.0)

    if n_sub > 0 and not allow_partial_visibility:
        for slot in range(n_sub):
            sched = max(scheduled_count[slot], 1)
            if visible_count[slot] < sched * 0.7 - 1e-9:
                raise SceneVisibilityError(
                    f"subject {slot} visible in only {visible_count[slot]}/{sched} scheduled frames"
                )
            if fully_inside_count[slot] < sched * 0.7 - 1e-9:
                raise SceneVisibilityError(
                    f"subject {slot} fully inside the frame in only "
                    f"{fully_inside_count[slot]}/{sched} scheduled frames"
                )

    if caption is None:
        rng = caption_rng if caption_rng is not None else np.random.default_rng(0)
        caption = build_caption(identity_specs, scene, rng)

    ordered_ids = []
    for spec in identity_specs:
        if spec.identity_id not in ordered_ids:
            ordered_ids.append(spec.identity_id)
    return RenderedClip(
        frames=frames,
        face_boxes=boxes,
        alpha_masks=masks,
        caption=caption,
        identity_ids=ordered_ids,
        scene=scene,
        fps=fps,
    )


def render_reference(
    identity: IdentitySpec,
    pose: float,
    expression: float,
    background_code: int,
    rng_seed: int,
    *,
    height: int = 64,
    width: int = 64,
    subject_scale: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Render a single-subject reference image plus its alpha mask.

    pose in degrees, expression in [0, 1]. The seed jitters center and scale
    so references of one identity are diverse across calls.
    """
    if not 0.0 <= expression <= 1.0:
        raise ConfigError("expression must be in [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), 0x2EF1]))
    if subject_scale is None:
        subject_scale = 0.46 + 0.08 * (rng.random() - 0.5)
    cx = 0.5 + 0.08 * (rng.random() - 0.5)
    cy = 0.5 + 0.08 * (rng.random() - 0.5)
    scene = SceneSpec(
        trajectory=({"kind": "static", "cx": cx, "cy": cy},),
        expression_curve={"kind": "constant", "v": float(expression)},
        pose_curve={"kind": "constant", "deg": float(pose)},
        background_code=int(background_code),
        subject_scale=float(subject_scale),
        n_subjects=1,
    )
    clip = render_clip([identity], scene, 1, height, width, caption="")
    return clip.frames[0], clip.alpha_masks[0, 0]


@dataclass
class CorpusConfig:
    n_identities: int = 48
    clips_per_identity: int = 4
    n_frames: int = 17
    height: int = 64
    width: int = 64
    fps: int = 8
    seed: int = 0
    n_subjects: int = 1
    identity_base: int = 0
    frac_no_subject: float = 0.10
    frac_count_inconsistent: float = 0.05
    frac_identity_swap: float = 0.05
    frac_crossing: float = 0.0  # multi-subject corpora only
    scale_lo: float = 0.42
    scale_hi: float = 0.56
    color_word_prob: float = 0.9
    ensure_cross_pairable: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_dict(d: dict) -> "CorpusConfig":
        return CorpusConfig(**d)


def _sample_path(rng: np.random.Generator, x_range, y_range, margin: float) -> dict:
    xlo, xhi = x_range
    ylo, yhi = y_range
    kind = ["static", "linear", "bounce", "circle"][int(rng.integers(4))]
    def u(lo, hi):
        return float(lo + (hi - lo) * rng.random())
    if kind == "static":
        return {"kind": "static", "cx": u(xlo, xhi), "cy": u(ylo, yhi)}
    if kind == "linear":
        return {"kind": "linear", "x0": u(xlo, xhi), "y0": u(ylo, yhi), "x1": u(xlo, xhi), "y1": u(ylo, yhi)}
    if kind == "bounce":
        amp = u(0.04, min(0.12, (yhi - ylo) / 2 + 0.01))
        return {
            "kind": "bounce",
            "cx": u(xlo, xhi),
            "cy": u(ylo + amp, yhi - amp) if yhi - amp > ylo + amp else (ylo + yhi) / 2,
            "amp": amp,
            "cycles": float(rng.choice([1.0, 1.5, 2.0])),
        }
    orbit = u(0.04, min(0.10, (xhi - xlo) / 2 + 0.01, (yhi - ylo) / 2 + 0.01))
    cx_lo, cx_hi = xlo + orbit, xhi - orbit
    cy_lo, cy_hi = ylo + orbit, yhi - orbit
    return {
        "kind": "circle",
        "cx": u(cx_lo, cx_hi) if cx_hi > cx_lo else (xlo + xhi) / 2,
        "cy": u(cy_lo, cy_hi) if cy_hi > cy_lo else (ylo + yhi) / 2,
        "orbit": orbit,
        "turns": float(rng.choice([0.5, 1.0])),
        "phase": u(0.0, 2.0 * math.pi),
    }


def _sample_scene(rng: np.random.Generator, cfg: CorpusConfig, n_subjects: int, crossing: bool = False) -> SceneSpec:
    if n_subjects == 2:
        scale = float(0.30 + (0.38 - 0.30) * rng.random())
    else:
        scale = float(cfg.scale_lo + (cfg.scale_hi - cfg.scale_lo) * rng.random())
    margin = scale / 2.0 * glyphs.max_extent() + 0.03
    if crossing and n_subjects == 2:
        paths = (
            {"kind": "linear", "x0": 0.25, "y0": 0.38, "x1": 0.65, "y1": 0.38},
            {"kind": "linear", "x0": 0.52, "y0": 0.62, "x1": 0.42, "y1": 0.62},
        )
    elif n_subjects == 2:
        paths = (
            _sample_path(rng, (margin, 0.5 - scale / 2 - 0.03), (margin, 1 - margin), margin),
            _sample_path(rng, (0.5 + scale / 2 + 0.03, 1 - margin), (margin, 1 - margin), margin),
        )
    elif n_subjects == 1:
        paths = (_sample_path(rng, (margin, 1 - margin), (margin, 1 - margin), margin),)
    else:
        paths = ()

    e_kind = ["constant", "ramp", "sine"][int(rng.integers(3))]
    if e_kind == "constant":
        expr = {"kind": "constant", "v": float(rng.random())}
    elif e_kind == "ramp":
        a, b = float(rng.random()), float(rng.random())
        expr = {"kind": "ramp", "v0": a, "v1": b}
    else:
        lo, hi = sorted([float(rng.random()), float(rng.random())])
        expr = {"kind": "sine", "lo": lo, "hi": hi, "cycles": float(rng.choice([0.5, 1.0]))}

    if rng.random() < 0.5:
        pose = {"kind": "constant", "deg": float(rng.random() * 360.0)}
    else:
        pose = {"kind": "spin", "deg0": float(rng.random() * 360.0), "rate": float(rng.uniform(-6.0, 6.0))}

    return SceneSpec(
        trajectory=paths,
        expression_curve=expr,
        pose_curve=pose,
        background_code=int(rng.integers(glyphs.N_BACKGROUNDS)),
        subject_scale=scale,
        n_subjects=n_subjects,
    )


def _fixture_blocks(n_frames: int, fps: int) -> np.ndarray:
    """Block index per frame at the downstream 2 Hz sampling cadence."""
    block = max(int(round(fps / 2.0)), 1)
    return np.arange(n_frames) // block


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def generate_corpus(config: CorpusConfig, out_dir: str | Path) -> Path:
    """Write a corpus directory: clip tensors, mask tensors, sidecars, manifest."""
    if config.ensure_cross_pairable and config.clips_per_identity < 2:
        raise ConfigError("clips_per_identity must be >= 2 when cross-video pairing is expected")
    if config.n_subjects not in (1, 2):
        raise ConfigError("corpus generation supports 1 or 2 subjects per clip")
    if config.n_subjects == 2 and config.n_identities % 2 != 0:
        raise ConfigError("two-subject corpora need an even identity count")

    out = Path(out_dir)
    (out / "clips").mkdir(parents=True, exist_ok=True)

    ids = [config.identity_base + i for i in range(config.n_identities)]
    roster: list[dict] = []
    if config.n_subjects == 1:
        for ident in ids:
            for c in range(config.clips_per_identity):
                roster.append({"identities": [ident], "kind": "none", "crossing": False})
    else:
        n_pairs = config.n_identities // 2
        for p in range(n_pairs):
            pair = [ids[p], ids[p + n_pairs]]
            for c in range(config.clips_per_identity):
                roster.append({"identities": pair, "kind": "none", "crossing": False})

    n_positive = len(roster)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC0]))
    if config.n_subjects == 2 and config.frac_crossing > 0:
        n_cross = int(round(config.frac_crossing * n_positive))
        for idx in rng.choice(n_positive, size=min(n_cross, n_positive), replace=False):
            roster[int(idx)]["crossing"] = True

    for _ in range(int(round(config.frac_no_subject * n_positive))):
        roster.append({"identities": [], "kind": "no_subject", "crossing": False})
    for _ in range(int(round(config.frac_count_inconsistent * n_positive))):
        ident = int(rng.choice(ids))
        extra = int(rng.choice([i for i in ids if i != ident]))
        roster.append({"identities": [ident, extra], "kind": "count_inconsistent", "crossing": False})
    for _ in range(int(round(config.frac_identity_swap * n_positive))):
        a = int(rng.choice(ids))
        b = int(rng.choice([i for i in ids if i != a]))
        roster.append({"identities": [a, b], "kind": "identity_swap", "crossing": False})

    entries = []
    blocks = _fixture_blocks(config.n_frames, config.fps)
    for clip_index, item in enumerate(roster):
        clip_id = f"clip_{clip_index:05d}"
        clip_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC1, clip_index]))
        kind = item["kind"]
        specs = [sample_identity(config.seed, i) for i in item["identities"]]
        visibility = None
        schedule = None
        allow_partial = False

        if kind == "no_subject":
            scene = _sample_scene(clip_rng, config, 0)
            subjects = []
        elif kind == "count_inconsistent":
            scene = _sample_scene(clip_rng, config, 2)
            subjects = specs
            visibility = [np.ones(config.n_frames, bool), blocks % 2 == 0]
            allow_partial = True
        elif kind == "identity_swap":
            scene = _sample_scene(clip_rng, config, 1)
            subjects = specs  # slot 0 alternates between the two specs
            schedule = (blocks % 2).astype(int)
        else:
            scene = _sample_scene(clip_rng, config, config.n_subjects, crossing=item["crossing"])
            subjects = specs

        for attempt in range(8):
            try:
                clip = render_clip(
                    subjects,
                    scene,
                    config.n_frames,
                    config.height,
                    config.width,
                    visibility=visibility,
                    identity_schedule=schedule,
                    allow_partial_visibility=allow_partial,
                    caption_rng=clip_rng,
                    fps=config.fps,
                )
                break
            except SceneVisibilityError:
                scene = _sample_scene(clip_rng, config, scene.n_subjects, crossing=item["crossing"])
        else:
            raise SceneVisibilityError(f"could not sample a visible scene for {clip_id}")
        if kind == "identity_swap":
            # caption should fit the primary identity only
            clip.caption = build_caption([specs[0]], scene, clip_rng, config.color_word_prob)
        clip.negative_kind = kind
        clip.crossing = item["crossing"]

        frames_path = out / "clips" / f"{clip_id}.gvt"
        masks_path = out / "clips" / f"{clip_id}_masks.gvt"
        sidecar_path = out / "clips" / f"{clip_id}.json"
        write_frames_u8(frames_path, clip.frames)
        write_tensor(masks_path, clip.alpha_masks)
        sidecar = {
            "clip_id": clip_id,
            "identity_ids": clip.identity_ids,
            "negative_kind": kind,
            "crossing": item["crossing"],
            "caption": clip.caption,
            "fps": config.fps,
            "n_frames": config.n_frames,
            "height": config.height,
            "width": config.width,
            "n_subjects": scene.n_subjects,
            "scene": scene.to_dict(),
            "face_boxes": [[[s, *box] for s, box in fb] for fb in clip.face_boxes],
            "files": {"frames": f"clips/{clip_id}.gvt", "masks": f"clips/{clip_id}_masks.gvt"},
        }
        sidecar_path.write_text(json.dumps(sidecar, sort_keys=True, indent=1))
        entries.append(
            {
                "clip_id": clip_id,
                "sidecar": f"clips/{clip_id}.json",
                "frames": f"clips/{clip_id}.gvt",
                "masks": f"clips/{clip_id}_masks.gvt",
                "sha256_frames": _sha256(frames_path),
                "sha256_masks": _sha256(masks_path),
                "sha256_sidecar": _sha256(sidecar_path),
                "negative_kind": kind,
                "identity_ids": clip.identity_ids,
            }
        )

    manifest = {"format": "glyphvid-corpus-v1", "config": config.to_dict(), "clips": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return out


class ClipRecord:
    """Lazy view over one corpus clip."""

    def __init__(self, root: Path, sidecar: dict):
        self.root = root
        self.meta = sidecar
        self.clip_id = sidecar["clip_id"]
        self.caption = sidecar["caption"]
        self.identity_ids = sidecar["identity_ids"]
        self.negative_kind = sidecar["negative_kind"]
        self.crossing = sidecar.get("crossing", False)
        self.fps = sidecar["fps"]
        self.n_frames = sidecar["n_frames"]
        self.n_subjects = sidecar["n_subjects"]
        self.scene = SceneSpec.from_dict(sidecar["scene"])
        self.face_boxes = [
            [(entry[0], tuple(entry[1:])) for entry in frame] for frame in sidecar["face_boxes"]
        ]

    def load_frames(self) -> np.ndarray:
        return read_frames_f32(self.root / self.meta["files"]["frames"])

    def load_masks(self) -> np.ndarray:
        return read_tensor(self.root / self.meta["files"]["masks"])

    def box_counts(self) -> list[int]:
        return [len(fb) for fb in self.face_boxes]


class Corpus:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise ConfigError(f"no corpus manifest at {manifest_path}")
        self.manifest = json.loads(manifest_path.read_text())
        self.config = CorpusConfig.from_dict(self.manifest["config"])
        self.clips = []
        for entry in self.manifest["clips"]:
            sidecar = json.loads((self.root / entry["sidecar"]).read_text())
            self.clips.append(ClipRecord(self.root, sidecar))

    def __len__(self) -> int:
        return len(self.clips)

    def by_id(self, clip_id: str) -> ClipRecord:
        for clip in self.clips:
            if clip.clip_id == clip_id:
                return clip
        raise KeyError(clip_id)
