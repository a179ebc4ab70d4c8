#pragma once

#include "it2mpc/fuzzy.hpp"
#include "it2mpc/synth.hpp"

namespace testutil {

// Three-rule CSTR benchmark plant: rule premises centered on x2 at
// {0.8862, 2.7520, 4.7052} with Gaussian interval memberships and
// sin^2 state weighting.
inline it2mpc::fuzzy::It2Plant cstr_plant() {
    using it2mpc::Matrix;
    using namespace it2mpc::fuzzy;
    It2Plant p;
    p.state_dim = 2;
    p.input_dim = 1;
    p.premise = [](const it2mpc::Vec& x) { return x[1]; };

    FuzzyRule r1;
    r1.A = Matrix{{0.75, 0.0119}, {-0.2238, 0.8262}};
    r1.Ad = Matrix{{0.0435, 0.0003}, {-0.0061, 0.0455}};
    r1.B = Matrix{{0.0004}, {0.0546}};
    r1.Bd = r1.B * 0.001;

    FuzzyRule r2;
    r2.A = Matrix{{0.6203, 0.0762}, {-1.2337, 1.3265}};
    r2.Ad = Matrix{{0.0403, 0.0019}, {-0.0312, 0.0581}};
    r2.B = Matrix{{0.0023}, {0.0698}};
    r2.Bd = r2.B * 0.001;

    FuzzyRule r3;
    r3.A = Matrix{{0.3068, 0.0442}, {-3.6621, 1.0765}};
    r3.Ad = Matrix{{0.0310, 0.0013}, {-0.1037, 0.0528}};
    r3.B = Matrix{{0.0015}, {0.0634}};
    r3.Bd = r3.B * 0.001;

    p.rules = {r1, r2, r3};
    for (double c : {0.8862, 2.7520, 4.7052})
        p.memberships.push_back(gaussian_it2(c, 1.2, 0.8, 0.8, 1));
    p.validate();
    return p;
}

inline it2mpc::fuzzy::It2ControllerShape cstr_controller(const it2mpc::fuzzy::It2Plant& p) {
    it2mpc::fuzzy::It2ControllerShape c;
    c.memberships = p.memberships;
    c.premise = p.premise;
    return c;
}

inline it2mpc::synth::SynthConfig cstr_synth_config() {
    using it2mpc::SymMatrix;
    return it2mpc::synth::SynthConfig::make(SymMatrix::diag({1e-6, 1e-9}), SymMatrix::diag({0.001}),
                                            0.8, 0.2, 10, 10, {6.0});
}

}  // namespace testutil
