"""Detection and tracking backends.

A backend answers two questions: "where are the people in this image"
(union mask) and "where did the tracked subject go in this frame". The
``yolosam`` backend wraps off-the-shelf models; ``mock`` is a
deterministic geometric stand-in used by the protocol conformance tests
and anywhere the model weights are unavailable.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import protocol

TRACK_LOST = object()


class MockBackend:
    """Deterministic model-free backend.

    detect: a centered disc of radius min(H, W)/6, or no detection when
    the image is entirely black. track: a disc of the same radius around
    the session's prompt point; an entirely black frame reports track
    loss. Purely geometric, so conformance tests are reproducible.
    """

    capabilities = ["detect", "track"]

    def __init__(self) -> None:
        self._points: dict[str, tuple[float, float]] = {}

    @staticmethod
    def _disc(shape: tuple[int, int], center: tuple[float, float]) -> np.ndarray:
        h, w = shape
        radius = min(h, w) / 6.0
        uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
        return np.hypot(uu - center[0], vv - center[1]) <= radius

    def detect(self, image_path: str) -> Optional[np.ndarray]:
        image = protocol.load_image(image_path)
        if not image.any():
            return None
        h, w = image.shape[:2]
        return self._disc((h, w), (w / 2.0, h / 2.0))

    def track_begin(self, session_id: str, image_path: str, point: tuple[float, float]):
        self._points[session_id] = (float(point[0]), float(point[1]))
        return self.track_next(session_id, image_path)

    def track_next(self, session_id: str, image_path: str):
        image = protocol.load_image(image_path)
        if not image.any():
            return TRACK_LOST
        return self._disc(image.shape[:2], self._points[session_id])

    def track_end(self, session_id: str) -> None:
        self._points.pop(session_id, None)


class YoloSamBackend:
    """YOLO person detection + promptable SAM segmentation with tracking.

    detect: person-class boxes above the confidence threshold are used as
    box prompts for the segmenter; the per-box masks are unioned. track:
    the first frame is segmented at the point prompt; later frames are
    re-prompted at the previous mask's centroid, which follows a subject
    that stays near where it was (the pipeline re-centers frames on the
    operator precisely to make that assumption hold).
    """

    capabilities = ["detect", "track"]

    def __init__(
        self,
        confidence: float = 0.5,
        yolo_model: str = "yolov8s.pt",
        sam_model: str = "facebook/sam2-hiera-large",
    ) -> None:
        try:
            from ultralytics import YOLO
        except ImportError as exc:
            raise RuntimeError(
                "the yolosam backend needs the 'ultralytics' package "
                "(pip install 'omnimask-adapter[ml]')"
            ) from exc
        try:
            from sam2.sam2_image_predictor import SAM2ImagePredictor
        except ImportError as exc:
            raise RuntimeError(
                "the yolosam backend needs the 'sam2' package "
                "(pip install 'omnimask-adapter[ml]')"
            ) from exc
        self.confidence = confidence
        self._detector = YOLO(yolo_model)
        self._predictor = SAM2ImagePredictor.from_pretrained(sam_model)
        self._last_mask: dict[str, np.ndarray] = {}

    PERSON_CLASS = 0

    def _person_boxes(self, image: np.ndarray) -> np.ndarray:
        result = self._detector(image, verbose=False)[0]
        boxes = result.boxes
        keep = (boxes.cls.cpu().numpy() == self.PERSON_CLASS) & (
            boxes.conf.cpu().numpy() >= self.confidence
        )
        return boxes.xyxy.cpu().numpy()[keep]

    def _segment(self, image: np.ndarray, box=None, point=None) -> Optional[np.ndarray]:
        self._predictor.set_image(image)
        kwargs = {"multimask_output": False}
        if box is not None:
            kwargs["box"] = box[None, :]
        if point is not None:
            kwargs["point_coords"] = np.asarray([point], dtype=np.float32)
            kwargs["point_labels"] = np.ones(1, dtype=np.int32)
        masks, _, _ = self._predictor.predict(**kwargs)
        mask = np.asarray(masks[0], dtype=bool)
        return mask if mask.any() else None

    def detect(self, image_path: str) -> Optional[np.ndarray]:
        image = protocol.load_image(image_path)
        boxes = self._person_boxes(image)
        if len(boxes) == 0:
            return None
        union = np.zeros(image.shape[:2], dtype=bool)
        for box in boxes:
            mask = self._segment(image, box=box)
            if mask is not None:
                union |= mask
        return union if union.any() else None

    def track_begin(self, session_id: str, image_path: str, point: tuple[float, float]):
        image = protocol.load_image(image_path)
        mask = self._segment(image, point=point)
        if mask is None:
            return TRACK_LOST
        self._last_mask[session_id] = mask
        return mask

    def track_next(self, session_id: str, image_path: str):
        image = protocol.load_image(image_path)
        prev = self._last_mask[session_id]
        ys, xs = np.nonzero(prev)
        point = (float(xs.mean()) + 0.5, float(ys.mean()) + 0.5)
        mask = self._segment(image, point=point)
        if mask is None:
            return TRACK_LOST
        self._last_mask[session_id] = mask
        return mask

    def track_end(self, session_id: str) -> None:
        self._last_mask.pop(session_id, None)
