from dataclasses import dataclass, field, replace
from typing import Any, Dict, List

from src.models.box import BBox


@dataclass(frozen=True)
class Instance:
    """One annotated object."""

    id: int
    image_id: int
    category_id: int
    box: BBox
    iscrowd: bool = False
    # Unrecognised COCO fields (area, segmentation, ...) kept verbatim.
    extra: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def with_box(self, box: BBox) -> 'Instance':
        return replace(self, box=box)


@dataclass(frozen=True)
class Prediction:
    """One detector output: a decoded box plus per-category scores."""

    image_id: int
    box: BBox
    scores: Dict[int, float]

    def score_for(self, category_id: int) -> float:
        return self.scores.get(category_id, 0.0)


@dataclass
class DatasetFile:
    """COCO annotation file: images, annotations and categories."""

    images: List[Dict[str, Any]] = field(default_factory=list)
    annotations: List[Instance] = field(default_factory=list)
    categories: List[Dict[str, Any]] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def image_ids(self) -> List[int]:
        return [image['id'] for image in self.images]

    @property
    def category_ids(self) -> List[int]:
        return [category['id'] for category in self.categories]

    def image_sizes(self) -> Dict[int, tuple]:
        return {image['id']: (image.get('width'), image.get('height')) for image in self.images}

    def with_annotations(self, annotations: List[Instance]) -> 'DatasetFile':
        return DatasetFile(images=self.images, annotations=annotations,
                           categories=self.categories, extra=self.extra)
