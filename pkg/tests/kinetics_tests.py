import unittest

import numpy as np
import orjson as json
from scipy.constants import R

from manifold_kinetics.exceptions import InvalidParameterError, MechanismJSONError, MechanismDataclassError, \
    MechanismValidationError, UnknownSpeciesError, ElementImbalanceError, NegativeConcentrationError, UnknownNameError
from manifold_kinetics.kinetics import Arrhenius, parse_mechanism, rates, vector_field, builtin_model, toy_h2_document, \
    TOY_EQUILIBRIUM
from manifold_kinetics.sampling import generator


def two_species_document(**changes) -> dict:
    document = {"species": [{"name": "A", "mw": 1.0, "composition": {"X": 2}},
                            {"name": "B", "mw": 1.0, "composition": {"X": 1}}],
                "temperature": 300.0,
                "reactions": [{"reactants": {"A": 1}, "products": {"B": 2}, "arrhenius": {"A": 2.0},
                               "reverse_arrhenius": {"A": 1.0}}]}
    document.update(changes)
    return document


class ParsingTests(unittest.TestCase):

    def testToyDocument(self):
        network = parse_mechanism(json.dumps(toy_h2_document()))
        self.assertEqual(["H2", "O2", "OH", "H2O"], network.species_names)
        self.assertEqual(("H", "O"), network.elements)
        self.assertEqual((3, 4), network.stoichiometry.shape)
        np.testing.assert_array_equal([[2, 0, 1, 2], [0, 2, 1, 1]], network.constraint_matrix())
        self.assertEqual("H2 + O2 <=> 2 OH", network.reactions[0].name)
        self.assertIsNone(network.metadata["enthalpy"])

    def testSyntaxError(self):
        with self.assertRaises(MechanismJSONError) as context:
            parse_mechanism('{"species": [\n')
        self.assertIsNotNone(context.exception.line)
        self.assertIsInstance(context.exception.upstream_error, json.JSONDecodeError)

    def testSchemaErrors(self):
        document = two_species_document()
        del document["temperature"]
        with self.assertRaises(MechanismDataclassError):
            parse_mechanism(document)
        with self.assertRaises(MechanismDataclassError):
            parse_mechanism(two_species_document(unexpected=1))
        with self.assertRaises(MechanismValidationError):
            parse_mechanism([])

    def testValidationErrors(self):
        species = [{"name": "A", "mw": 1.0, "composition": {"X": 2}}, {"name": "A", "mw": 1.0, "composition": {"X": 1}}]
        with self.assertRaises(MechanismValidationError) as context:
            parse_mechanism(two_species_document(species=species))
        self.assertIn("repeated: A", str(context.exception))

        with self.assertRaises(MechanismValidationError):
            parse_mechanism(two_species_document(temperature=0.0))
        with self.assertRaises(MechanismValidationError):
            parse_mechanism(two_species_document(species=[{"name": "A", "mw": 0.0, "composition": {"X": 2}},
                                                          {"name": "B", "mw": 1.0, "composition": {"X": 1}}]))

    def testUnknownSpecies(self):
        reactions = [{"reactants": {"A": 1}, "products": {"C": 2}, "arrhenius": {"A": 1.0}}]
        with self.assertRaises(UnknownSpeciesError) as context:
            parse_mechanism(two_species_document(reactions=reactions))
        self.assertEqual("C", context.exception.species)

    def testElementImbalance(self):
        reactions = [{"reactants": {"A": 1}, "products": {"B": 1}, "arrhenius": {"A": 1.0}, "name": "lossy"}]
        with self.assertRaises(ElementImbalanceError) as context:
            parse_mechanism(two_species_document(reactions=reactions))
        self.assertEqual("lossy", context.exception.reaction)
        self.assertEqual("X", context.exception.element)


class RateTests(unittest.TestCase):

    def testArrhenius(self):
        self.assertAlmostEqual(600.0, Arrhenius(2.0, 1.0).rate_constant(300.0))
        self.assertAlmostEqual(2.0 * np.exp(-1.0), Arrhenius(2.0, 0.0, R * 300.0).rate_constant(300.0))

    def testMassAction(self):
        network = parse_mechanism(two_species_document())
        np.testing.assert_allclose([2.0 * 0.5 - 0.3 ** 2], rates(network, np.array([0.5, 0.3])))
        np.testing.assert_allclose([0.0], rates(network, np.array([-1e-13, 0.0])))

        with self.assertRaises(NegativeConcentrationError) as context:
            rates(network, np.array([0.5, -1e-3]))
        self.assertEqual(1, context.exception.index)

    def testToyConservesElements(self):
        field = builtin_model("toy-h2-skeleton")
        constraints = field.network.constraint_matrix()
        rng = generator(3, 0)
        for _ in range(20):
            state = rng.random(4)
            np.testing.assert_allclose(np.zeros(2), constraints @ field(state), atol=1e-12)

    def testToyEquilibrium(self):
        field = builtin_model("toy-h2-skeleton")
        np.testing.assert_allclose([TOY_EQUILIBRIUM[name] for name in field.names], field.equilibrium)
        np.testing.assert_allclose(np.zeros(4), field(field.equilibrium), atol=1e-12)
        np.testing.assert_allclose(field.network.element_totals(field.equilibrium), field.network.element_totals(field.fresh))

    def testMolecularWeights(self):
        document = two_species_document(species=[{"name": "A", "mw": 4.0, "composition": {"X": 2}},
                                                 {"name": "B", "mw": 2.0, "composition": {"X": 1}}])
        network = parse_mechanism(document)
        field = vector_field(network)
        state = np.array([1.0, 0.6])
        self.assertAlmostEqual(0.0, (network.constraint_matrix() @ field(state))[0])
        self.assertTrue(field.nonnegative)


class BuiltinModelTests(unittest.TestCase):

    def testDavisSkodjeOffsetDecays(self):
        field = builtin_model("davis-skodje", gamma=10.0)
        rng = generator(4, 0)
        for _ in range(10):
            state = rng.random(2) * [2.0, 1.5]
            derivative = field(state)
            offset_rate = derivative[1] - derivative[0] / (1.0 + state[0]) ** 2
            self.assertAlmostEqual(-10.0 * field.slow_manifold(state)[0], offset_rate)

    def testLinear(self):
        field = builtin_model("linear-2d", a=1.0, b=5.0)
        np.testing.assert_allclose([-2.0, -5.0], field(np.array([2.0, 1.0])))
        np.testing.assert_allclose([3.0], field.slow_manifold(np.array([1.0, 3.0])))

    def testErrors(self):
        with self.assertRaises(UnknownNameError):
            builtin_model("brusselator")
        with self.assertRaises(InvalidParameterError):
            builtin_model("davis-skodje", gamma=0.5)
        with self.assertRaises(InvalidParameterError):
            builtin_model("linear-2d", c=1.0)


if __name__ == '__main__':
    unittest.main()
