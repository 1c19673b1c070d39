#include <systemc>
#include <tlm>
#include <tlm_utils/simple_target_socket.h>

#include "payload.h"

// Non-blocking echo target.  Completes the transaction on the forward path
// by returning TLM_UPDATED with the phase advanced to BEGIN_RESP.
struct echo_target_nb : sc_core::sc_module {
    tlm_utils::simple_target_socket<echo_target_nb> target_socket;

    SC_CTOR(echo_target_nb) : target_socket("target_socket") {
        target_socket.register_nb_transport_fw(this, &echo_target_nb::nb_transport_fw);
    }

    tlm::tlm_sync_enum nb_transport_fw(tlm::tlm_generic_payload& trans,
                                       tlm::tlm_phase& phase,
                                       sc_core::sc_time& delay) {
        if (phase != tlm::BEGIN_REQ) {
            return tlm::TLM_ACCEPTED;
        }
        payload* p = reinterpret_cast<payload*>(trans.get_data_ptr());
        p->data_out = p->data_in;
        trans.set_response_status(tlm::TLM_OK_RESPONSE);
        phase = tlm::BEGIN_RESP;
        return tlm::TLM_UPDATED;
    }
};
