# Derenderer Library
#
# Copyright 2026 The Derenderer Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import json
import unittest

import numpy as np

from derenderer.catalog import SpriteCatalog
from derenderer.dataset import sample_spec
from derenderer.exceptions import InvalidObject, DomainMismatch, InvalidDomain, ConfigurationError, UnknownCategory
from derenderer.spec import SceneSpec, Circle, Line, Rectangle, SceneObject, OrderingStrategy, canonical_order, \
    shape_from_array, object_from_array
from test.fixtures import fixture_path


class SceneObjectTestCase(unittest.TestCase):

    def test_circle_must_fit_canvas(self):
        Circle(4, 4, 4).validate()
        with self.assertRaises(InvalidObject):
            Circle(3, 8, 4).validate()
        with self.assertRaises(InvalidObject):
            Circle(8, 8, 0).validate()

    def test_rectangle_corners_strictly_ordered(self):
        Rectangle(0, 0, 1, 1).validate()
        with self.assertRaises(InvalidObject):
            Rectangle(5, 2, 5, 9).validate()
        with self.assertRaises(InvalidObject):
            Rectangle(2, 9, 5, 3).validate()

    def test_coordinates_within_grid(self):
        with self.assertRaises(InvalidObject):
            Line(0, 0, 16, 3).validate()
        with self.assertRaises(InvalidObject):
            Line(-1, 0, 3, 3).validate()

    def test_scene_object_subcategory_per_category(self):
        catalog = SpriteCatalog.default()
        SceneObject(0, 1, 0, 0, 5, 5).validate(catalog)
        with self.assertRaises(InvalidObject):
            SceneObject(0, 2, 0, 0, 5, 5).validate(catalog)
        with self.assertRaises(InvalidObject):
            SceneObject(0, 0, 3, 0, 5, 5).validate(catalog)
        with self.assertRaises(InvalidObject):
            SceneObject(0, 0, 0, 0, 500, 5).validate(catalog)

    def test_shape_from_array(self):
        self.assertEqual(Circle(8, 8, 2), shape_from_array([0, 8, 8, 2]))
        self.assertEqual(Line(0, 0, 4, 4, arrow = True, dashed = False), shape_from_array([1, 0, 0, 4, 4, 1, 0]))
        self.assertEqual(Rectangle(1, 2, 3, 4), shape_from_array([2, 1, 2, 3, 4]))

        with self.assertRaises(InvalidObject):
            shape_from_array([0, 8, 8])
        with self.assertRaises(InvalidObject):
            shape_from_array([7, 1, 2])

    def test_scene_object_from_array_requires_six_integers(self):
        self.assertEqual(SceneObject(1, 2, 0, 1, 55, 65), object_from_array('abstract_scene', [1, 2, 0, 1, 55, 65]))
        with self.assertRaises(InvalidObject):
            object_from_array('abstract_scene', [1, 2, 0, 1, 55])


class SceneSpecTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        with open(fixture_path('specs.json')) as fp:
            data = json.load(fp)
        cls.specs = [SceneSpec.from_dict(item) for domain in data for item in data[domain]]

    def test_fixture_specs_are_valid(self):
        for spec in self.specs:
            spec.validate()

    def test_dict_round_trip(self):
        for spec in self.specs:
            self.assertEqual(spec, SceneSpec.from_dict(spec.to_dict()))

    def test_unknown_domain(self):
        with self.assertRaises(InvalidDomain):
            SceneSpec('vector_art')

    def test_object_count_bounds(self):
        spec = SceneSpec('abstract_scene', (SceneObject(0, 0, 0, 0, 5, 5),))
        with self.assertRaises(InvalidObject):
            spec.validate()
        spec.validate(check_count = False)

    def test_mixed_domains_rejected(self):
        spec = SceneSpec('noisy_shapes', (Circle(8, 8, 2), SceneObject(0, 0, 0, 0, 5, 5)))
        with self.assertRaises(DomainMismatch):
            spec.validate()

    def test_same_objects_ignores_order(self):
        a = SceneSpec('noisy_shapes', (Circle(8, 8, 2), Rectangle(0, 0, 2, 2)))
        b = SceneSpec('noisy_shapes', (Rectangle(0, 0, 2, 2), Circle(8, 8, 2)))
        self.assertNotEqual(a, b)
        self.assertTrue(a.same_objects(b))
        self.assertFalse(a.same_objects(SceneSpec('noisy_shapes', (Circle(8, 8, 2),))))


class CanonicalOrderTestCase(unittest.TestCase):

    def test_type_order_circle_before_line(self):
        spec = SceneSpec('noisy_shapes', (Line(0, 0, 4, 4), Circle(8, 8, 2)))
        ordered = canonical_order(spec, OrderingStrategy('type'))
        self.assertEqual((Circle(8, 8, 2), Line(0, 0, 4, 4)), ordered.objects)

    def test_asis_is_identity(self):
        spec = SceneSpec('noisy_shapes', (Rectangle(9, 9, 12, 12), Line(0, 0, 4, 4), Circle(8, 8, 2)))
        self.assertEqual(spec, canonical_order(spec, OrderingStrategy('asis')))

    def test_identical_objects(self):
        spec = SceneSpec('noisy_shapes', (Circle(8, 8, 2), Circle(8, 8, 2)))
        for variant in OrderingStrategy.VARIANTS:
            self.assertTrue(spec.same_objects(canonical_order(spec, OrderingStrategy(variant))))

    def test_size_order_largest_first(self):
        spec = SceneSpec('noisy_shapes', (Circle(2, 2, 1), Rectangle(5, 5, 15, 15), Line(0, 10, 2, 10)))
        ordered = canonical_order(spec, OrderingStrategy('size'))
        self.assertEqual((Rectangle(5, 5, 15, 15), Circle(2, 2, 1), Line(0, 10, 2, 10)), ordered.objects)

    def test_position_order_top_to_bottom(self):
        spec = SceneSpec('noisy_shapes', (Rectangle(0, 10, 3, 12), Circle(8, 3, 2), Line(12, 1, 14, 1)))
        ordered = canonical_order(spec, OrderingStrategy('position'))
        self.assertEqual((Circle(8, 3, 2), Line(12, 1, 14, 1), Rectangle(0, 10, 3, 12)), ordered.objects)

    def test_size_order_uses_given_catalog(self):
        catalog = SpriteCatalog([2] * 12)
        small, large = SceneObject(5, 0, 0, 0, 100, 100), SceneObject(11, 1, 0, 0, 250, 200)
        spec = SceneSpec('abstract_scene', (small, large))

        self.assertEqual((large, small), canonical_order(spec, OrderingStrategy('size'), catalog).objects)
        self.assertEqual((small, large), canonical_order(spec, OrderingStrategy('position'), catalog).objects)
        with self.assertRaises(UnknownCategory):
            canonical_order(spec, OrderingStrategy('size'))

    def test_orderings_are_total_and_idempotent(self):
        rng = np.random.default_rng(11)
        for domain in ('noisy_shapes', 'abstract_scene'):
            for _ in range(50):
                spec = sample_spec(domain, rng)
                permuted = spec.replace_objects([spec.objects[i] for i in rng.permutation(len(spec))])

                for variant in ('type', 'size', 'position', 'random'):
                    strategy = OrderingStrategy(variant, 5 if variant == 'random' else None)
                    ordered = canonical_order(spec, strategy)

                    self.assertTrue(ordered.same_objects(spec))
                    self.assertEqual(ordered, canonical_order(permuted, strategy))
                    if variant != 'random':
                        self.assertEqual(ordered, canonical_order(ordered, strategy))

    def test_random_order_is_seeded(self):
        spec = SceneSpec('noisy_shapes', tuple(Circle(x, 8, 1) for x in range(2, 14, 2)))
        a = canonical_order(spec, OrderingStrategy('random', 1))
        self.assertEqual(a, canonical_order(spec, OrderingStrategy('random', 1)))
        self.assertNotEqual(
            [canonical_order(spec, OrderingStrategy('random', s)).objects for s in range(5)],
            [a.objects] * 5
        )

    def test_parse(self):
        self.assertEqual(OrderingStrategy('random', 7), OrderingStrategy.parse('random:7'))
        self.assertEqual(OrderingStrategy('random', 0), OrderingStrategy.parse('random'))
        self.assertEqual('size', str(OrderingStrategy.parse('size')))
        with self.assertRaises(ConfigurationError):
            OrderingStrategy.parse('alphabetical')
        with self.assertRaises(ConfigurationError):
            OrderingStrategy.parse('type:3')


if __name__ == '__main__':
    unittest.main()
